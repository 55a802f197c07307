//! Monitored quantities of a run: per-step norms and energy, the
//! continuous-dependence comparison of two runs, and the separation of a
//! logarithmic run from the singular values.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BulkField, GridError, StripGrid};
use crate::potential::MonotoneGraph;
use crate::solver::{Mode, RunOutput, Simulation, State, StepData};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("runs are not comparable: {0}")]
    ConfigMismatch(String),
    #[error("separation needs a graph with an open bounded domain, got {0}")]
    DomainKindMismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Monitored quantities at one time level. Increments (`dy_*`, `dw_v`) are
/// relative to the previous level and zero at step 0. `dw_v` stands in for
/// the time derivative of `w`, which the scheme does not store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub y_h: f64,
    pub y_v: f64,
    pub y_dual: f64,
    pub y_grad: f64,
    pub y_gamma_h: f64,
    pub y_gamma_v: f64,
    pub w_v: f64,
    pub xi_h: f64,
    pub xi_gamma_h: f64,
    pub xi_inf: f64,
    pub y_max_abs: f64,
    pub y_gamma_max_abs: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub yosida_energy: f64,
    pub newton_iterations: usize,
    pub dy_dual: f64,
    pub dy_h_visc: f64,
    pub dy_gamma_h: f64,
    pub dw_v: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.mass,
            self.energy,
            self.y_h,
            self.y_v,
            self.y_dual,
            self.y_grad,
            self.y_gamma_h,
            self.y_gamma_v,
            self.w_v,
            self.xi_h,
            self.xi_gamma_h,
            self.xi_inf,
            self.y_max_abs,
            self.y_gamma_max_abs,
            self.y_min,
            self.y_max,
            self.yosida_energy,
            self.dy_dual,
            self.dy_h_visc,
            self.dy_gamma_h,
            self.dw_v,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Σ_Ω μ B̂_ε(y) + Σ_Γ s B̂_{Γ,ε}(y_Γ), zero in linearized mode.
pub fn yosida_energy(sim: &Simulation, y: &BulkField) -> f64 {
    if sim.mode() == Mode::Linearized {
        return 0.0;
    }
    let grid = sim.grid();
    let pair = sim.pair();
    let bulk = grid.integrate(&y.map(|v| pair.bulk.graph.yosida_primitive(sim.eps(), v)));
    let boundary = grid.integrate_boundary(&grid.trace(y).map(|v| pair.boundary_yosida_primitive(sim.eps(), v)));
    bulk + boundary
}

/// Discrete energy
/// `½ a(y,y) + Σ_Ω μ (B̂_ε(y) + λ π̂(y) − g y) + ½ a_Γ(y_Γ,y_Γ) + Σ_Γ s (B̂_{Γ,ε}(y_Γ) + λ_Γ π̂_Γ(y_Γ) − g_Γ y_Γ)`.
/// In linearized mode `B̂` terms vanish and `π̂(r) = r²/2`.
pub fn energy(sim: &Simulation, y: &BulkField, data: &StepData) -> f64 {
    let grid = sim.grid();
    let pair = sim.pair();
    let y_gamma = grid.trace(y);
    let (bulk_pert, boundary_pert): (BulkField, crate::grid::BoundaryField) = match sim.mode() {
        Mode::Linearized => (y.map(|v| 0.5 * v * v), y_gamma.map(|v| 0.5 * v * v)),
        Mode::Nonlinear => (
            y.map(|v| pair.bulk.perturbation.primitive(v)),
            y_gamma.map(|v| pair.boundary.perturbation.primitive(v)),
        ),
    };
    let bulk_density = BulkField(
        (0..grid.node_count())
            .map(|n| data.lambda.0[n] * bulk_pert.0[n] - data.g.0[n] * y.0[n])
            .collect(),
    );
    let boundary_density = crate::grid::BoundaryField(
        (0..grid.boundary_count())
            .map(|k| data.lambda_gamma.0[k] * boundary_pert.0[k] - data.g_gamma.0[k] * y_gamma.0[k])
            .collect(),
    );
    0.5 * grid.grad_inner(y, y)
        + 0.5 * grid.surface_grad_inner(&y_gamma, &y_gamma)
        + grid.integrate(&bulk_density)
        + grid.integrate_boundary(&boundary_density)
        + yosida_energy(sim, y)
}

/// Diagnostics of `state`, with increments taken from `prev` if given.
pub fn record(
    sim: &Simulation,
    state: &State,
    prev: Option<&State>,
    newton_iterations: usize,
) -> Result<DiagnosticsRecord, GridError> {
    let grid = sim.grid();
    let data = sim.data_at(state.time);
    let step = (state.time / sim.dt()).round() as usize;
    let (dy_dual, dy_h_visc, dy_gamma_h, dw_v) = match prev {
        Some(p) => {
            let dy = state.y.sub(&p.y);
            (
                grid.dual_norm(&dy)?,
                sim.tau_eps().sqrt() * grid.l2_norm(&dy),
                grid.l2_norm_boundary(&state.y_gamma.sub(&p.y_gamma)),
                grid.v_norm(&state.w.sub(&p.w)),
            )
        }
        None => (0.0, 0.0, 0.0, 0.0),
    };
    Ok(DiagnosticsRecord {
        step,
        time: state.time,
        mass: grid.mean_value(&state.y),
        energy: energy(sim, &state.y, &data),
        y_h: grid.l2_norm(&state.y),
        y_v: grid.v_norm(&state.y),
        y_dual: grid.dual_norm(&state.y)?,
        y_grad: grid.grad_seminorm(&state.y),
        y_gamma_h: grid.l2_norm_boundary(&state.y_gamma),
        y_gamma_v: grid.v_norm_boundary(&state.y_gamma),
        w_v: grid.v_norm(&state.w),
        xi_h: grid.l2_norm(&state.xi),
        xi_gamma_h: grid.l2_norm_boundary(&state.xi_gamma),
        xi_inf: state.xi.max_abs(),
        y_max_abs: state.y.max_abs(),
        y_gamma_max_abs: state.y_gamma.max_abs(),
        y_min: state.y.0.iter().copied().fold(f64::INFINITY, f64::min),
        y_max: state.y.0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        yosida_energy: yosida_energy(sim, &state.y),
        newton_iterations,
        dy_dual,
        dy_h_visc,
        dy_gamma_h,
        dw_v,
    })
}

/// Writes the records as CSV with a header row of field names.
pub fn write_csv<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<(), DiagnosticsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<DiagnosticsRecord>, DiagnosticsError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Discrete counterpart of the continuous-dependence inequality for two runs.
/// Time-sup norms are maxima over steps; time integrals are `Δt`-weighted
/// sums over steps `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub lhs: f64,
    pub rhs_data: f64,
    /// `lhs / rhs_data`, absent when `rhs_data = 0`.
    pub ratio: Option<f64>,
    pub sup_dual_sq: f64,
    pub sup_h_sq: f64,
    pub sup_gamma_h_sq: f64,
    pub grad_l2_sq: f64,
    pub surface_grad_l2_sq: f64,
    pub initial_dual_sq: f64,
    pub initial_h_sq: f64,
    pub initial_gamma_h_sq: f64,
    pub g_l2_sq: f64,
    pub g_gamma_l2_sq: f64,
}

fn check_comparable(a: &RunOutput, b: &RunOutput) -> Result<(), DiagnosticsError> {
    let (ca, cb) = (&a.config, &b.config);
    let mismatch = |what: &str| Err(DiagnosticsError::ConfigMismatch(what.to_string()));
    if a.grid != b.grid {
        return mismatch("grids differ");
    }
    if a.dt != b.dt || a.snapshots.len() != b.snapshots.len() {
        return mismatch("time steps differ");
    }
    if ca.eps != cb.eps || ca.tau != cb.tau || ca.mode != cb.mode {
        return mismatch("eps, tau or mode differ");
    }
    if ca.potential != cb.potential {
        return mismatch("potentials differ");
    }
    if a.save_every != 1 || b.save_every != 1 {
        return mismatch("both runs must keep every step");
    }
    let (ma, mb) = (
        a.grid.mean_value(&a.snapshots[0].1.y),
        b.grid.mean_value(&b.snapshots[0].1.y),
    );
    if (ma - mb).abs() > 1e-12 {
        return mismatch(&format!("initial means differ: {ma} vs {mb}"));
    }
    Ok(())
}

/// Assembles both sides of the dependence inequality from two complete runs
/// with the same grid, `Δt`, `ε`, `τ`, potentials and initial mean.
pub fn dependence_report(a: &RunOutput, b: &RunOutput) -> Result<DependenceReport, DiagnosticsError> {
    check_comparable(a, b)?;
    let grid: &StripGrid = &a.grid;
    let tau = a.config.tau;
    let dt = a.dt;
    let (mut sup_dual_sq, mut sup_h_sq, mut sup_gamma_h_sq) = (0.0f64, 0.0f64, 0.0f64);
    let (mut grad_l2_sq, mut surface_grad_l2_sq, mut g_l2_sq, mut g_gamma_l2_sq) = (0.0, 0.0, 0.0, 0.0);
    for ((n, sa), (_, sb)) in a.snapshots.iter().zip(&b.snapshots) {
        let d = sa.y.sub(&sb.y);
        let dg = sa.y_gamma.sub(&sb.y_gamma);
        sup_dual_sq = sup_dual_sq.max(grid.dual_norm(&d)?.powi(2));
        sup_h_sq = sup_h_sq.max(grid.l2_norm(&d).powi(2));
        sup_gamma_h_sq = sup_gamma_h_sq.max(grid.l2_norm_boundary(&dg).powi(2));
        if *n > 0 {
            grad_l2_sq += dt * grid.grad_seminorm(&d).powi(2);
            surface_grad_l2_sq += dt * grid.surface_grad_seminorm(&dg).powi(2);
            let (da, db) = (a.data.at(grid, sa.time), b.data.at(grid, sb.time));
            g_l2_sq += dt * grid.l2_norm(&da.g.sub(&db.g)).powi(2);
            g_gamma_l2_sq += dt * grid.l2_norm_boundary(&da.g_gamma.sub(&db.g_gamma)).powi(2);
        }
    }
    let (ya, yb) = (&a.snapshots[0].1, &b.snapshots[0].1);
    let d0 = ya.y.sub(&yb.y);
    let initial_dual_sq = grid.dual_norm(&d0)?.powi(2);
    let initial_h_sq = grid.l2_norm(&d0).powi(2);
    let initial_gamma_h_sq = grid.l2_norm_boundary(&ya.y_gamma.sub(&yb.y_gamma)).powi(2);
    let lhs = sup_dual_sq + tau * sup_h_sq + sup_gamma_h_sq + grad_l2_sq + surface_grad_l2_sq;
    let rhs_data = initial_dual_sq + tau * initial_h_sq + initial_gamma_h_sq + g_l2_sq + g_gamma_l2_sq;
    Ok(DependenceReport {
        lhs,
        rhs_data,
        ratio: (rhs_data > 0.0).then(|| lhs / rhs_data),
        sup_dual_sq,
        sup_h_sq,
        sup_gamma_h_sq,
        grad_l2_sq,
        surface_grad_l2_sq,
        initial_dual_sq,
        initial_h_sq,
        initial_gamma_h_sq,
        g_l2_sq,
        g_gamma_l2_sq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Distance from the range of `y` over the run to the endpoints of the domain.
    pub delta: f64,
    pub ok: bool,
}

/// Distance of the whole-run range of `y` from the boundary of the
/// (open, bounded) domain of a logarithmic graph.
pub fn separation_report(run: &RunOutput, graph: &MonotoneGraph) -> Result<SeparationReport, DiagnosticsError> {
    if !matches!(graph, MonotoneGraph::Logarithmic) {
        return Err(DiagnosticsError::DomainKindMismatch(format!("{graph:?}")));
    }
    let domain = graph.domain();
    let lo = run.diagnostics.iter().map(|r| r.y_min).fold(f64::INFINITY, f64::min);
    let hi = run
        .diagnostics
        .iter()
        .map(|r| r.y_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta = (lo - domain.lower).min(domain.upper - hi);
    Ok(SeparationReport { delta, ok: delta > 0.0 })
}
