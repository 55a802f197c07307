//! Manufactured-solution convergence study in linearized mode.
//!
//! Exact solution `y = φ e^{−t}` with `φ = cos(2πx/lx) cos(πy/ly)`, which has
//! zero normal derivative on both boundary lines. With `κ = (2π/lx)² + (π/ly)²`
//! the bulk equations give `w = φ e^{−t}/κ` and
//!
//! ```text
//! g   = (−τ + κ + λ − 1/κ) φ e^{−t}
//! g_Γ = (−1 + (2π/lx)² + λ_Γ) φ e^{−t}
//! ```
//!
//! Temporal studies use the forcing that makes the nodal values of `y`
//! satisfy the space-discrete system exactly, so only the time error remains.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{BoundaryField, BulkField, GridError, GridSpec, StripGrid};
use crate::solver::{
    tau_eps, DataSource, FieldPreset, Mode, RunConfig, Simulation, SolverError, StepData, TimeAffineField,
};

/// Which forcing drives the manufactured run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Forcing {
    /// The continuous `g`, `g_Γ` sampled at nodes.
    Continuous,
    /// Forcing for which the nodal exact solution solves the space-discrete system.
    Discrete,
}

/// Time-separable data `λ`, `λ_Γ` constant and `g = G e^{−t}`, `g_Γ = G_Γ e^{−t}`.
#[derive(Debug, Clone)]
pub struct ManufacturedData {
    lambda: BulkField,
    lambda_gamma: BoundaryField,
    g: BulkField,
    g_gamma: BoundaryField,
}

impl DataSource for ManufacturedData {
    fn at(&self, _grid: &StripGrid, t: f64) -> StepData {
        let decay = (-t).exp();
        StepData {
            time: t,
            lambda: self.lambda.clone(),
            lambda_gamma: self.lambda_gamma.clone(),
            g: self.g.scale(decay),
            g_gamma: self.g_gamma.scale(decay),
        }
    }
}

/// Spatial profile `φ` sampled on `grid`.
pub fn profile(grid: &StripGrid) -> BulkField {
    let (kx, ky) = (2.0 * PI / grid.lx(), PI / grid.ly());
    grid.bulk_from_fn(|x, y| (kx * x).cos() * (ky * y).cos())
}

/// Exact solution at time `t`, sampled at nodes.
pub fn exact(grid: &StripGrid, t: f64) -> BulkField {
    profile(grid).scale((-t).exp())
}

fn constant_value(field: &TimeAffineField, key: &str) -> Result<f64, SolverError> {
    match (&field.a, field.is_autonomous()) {
        (FieldPreset::Constant { value }, true) => Ok(*value),
        _ => Err(SolverError::InvalidArgument(format!(
            "{key} must be constant for the manufactured solution"
        ))),
    }
}

impl ManufacturedData {
    pub fn new(cfg: &RunConfig, grid: &StripGrid, forcing: Forcing) -> Result<Self, SolverError> {
        let lambda = constant_value(&cfg.lambda, "lambda")?;
        let lambda_gamma = constant_value(&cfg.lambda_gamma, "lambda_gamma")?;
        let tau = tau_eps(cfg.tau, cfg.eps);
        let kx2 = (2.0 * PI / grid.lx()).powi(2);
        let kappa = kx2 + (PI / grid.ly()).powi(2);
        let phi = profile(grid);
        let phi_gamma = grid.trace(&phi);
        let g_gamma = phi_gamma.scale(-1.0 + kx2 + lambda_gamma);
        let g = match forcing {
            Forcing::Continuous => phi.scale(-tau + kappa + lambda - 1.0 / kappa),
            Forcing::Discrete => discrete_forcing(grid, &phi, &g_gamma, tau, lambda, lambda_gamma)?,
        };
        Ok(ManufacturedData {
            lambda: grid.bulk_constant(lambda),
            lambda_gamma: grid.boundary_constant(lambda_gamma),
            g,
            g_gamma,
        })
    }
}

/// Bulk forcing profile `G` such that `y = φ e^{−t}` solves the lumped
/// system in continuous time, given the boundary profile `G_Γ`.
fn discrete_forcing(
    grid: &StripGrid,
    phi: &BulkField,
    g_gamma: &BoundaryField,
    tau: f64,
    lambda: f64,
    lambda_gamma: f64,
) -> Result<BulkField, GridError> {
    // μ ∂_t y + A w = 0 with ∂_t y = −φ e^{−t}: w = e^{−t} 𝒩φ
    let w = grid.neumann_solve(phi)?;
    let mu = grid.bulk_measure();
    let s = grid.surface_measure();
    let a_phi = grid.stiffness_apply(&phi.0);
    let phi_gamma = grid.trace(phi);
    let ag = grid.surface_stiffness_apply(&phi_gamma.0);
    let g = (0..grid.node_count())
        .map(|n| {
            let mut rest = a_phi[n] - mu[n] * w.0[n];
            if let Some(k) = grid.boundary_index(n) {
                rest += s * (-phi_gamma.0[k] + lambda_gamma * phi_gamma.0[k] - g_gamma.0[k]) + ag[k];
            }
            -tau * phi.0[n] + lambda * phi.0[n] + rest / mu[n]
        })
        .collect();
    Ok(BulkField(g))
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `time` or `space`.
    pub study: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub dt: f64,
    /// `max_n ‖yⁿ − y(tⁿ)‖_H`.
    pub error: f64,
    /// Observed order against the previous row, if any.
    pub order: Option<f64>,
}

/// Runs the manufactured problem on `cfg` (mode forced to linearized) and
/// returns the discrete `L∞(0,T;H)` error.
pub fn manufactured_error(cfg: &RunConfig, forcing: Forcing) -> Result<f64, SolverError> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Linearized;
    cfg.y0 = FieldPreset::Fourier {
        amplitude: 1.0,
        kx: 1,
        ky: 1,
        offset: 0.0,
    };
    let grid = StripGrid::from_spec(&cfg.grid)?;
    let data = Arc::new(ManufacturedData::new(&cfg, &grid, forcing)?);
    let sim = Simulation::with_data(&cfg, data)?;
    let mut error = 0.0f64;
    sim.run_observed(usize::MAX, |state, _| {
        error = error.max(grid.l2_norm(&state.y.sub(&exact(&grid, state.time))));
    })?;
    Ok(error)
}

fn with_orders(mut rows: Vec<ConvergenceRow>, by: impl Fn(&ConvergenceRow) -> f64) -> Vec<ConvergenceRow> {
    for k in 1..rows.len() {
        let (prev, cur) = (&rows[k - 1], &rows[k]);
        rows[k].order = Some((prev.error / cur.error).ln() / (by(prev) / by(cur)).ln());
    }
    rows
}

/// Time refinement on `cfg.grid` with discrete forcing.
pub fn temporal_study(cfg: &RunConfig, dts: &[f64], workers: usize) -> Result<Vec<ConvergenceRow>, SolverError> {
    let grid = StripGrid::from_spec(&cfg.grid)?;
    let errors = crate::solver::run_pool(workers, dts.to_vec(), |dt| {
        let c = RunConfig { dt, ..cfg.clone() };
        manufactured_error(&c, Forcing::Discrete)
    });
    let rows = dts
        .iter()
        .zip(errors)
        .map(|(&dt, e)| {
            Ok(ConvergenceRow {
                study: "time".into(),
                nx: grid.nx(),
                ny: grid.ny(),
                h: grid.hx(),
                dt,
                error: e?,
                order: None,
            })
        })
        .collect::<Result<Vec<_>, SolverError>>()?;
    Ok(with_orders(rows, |r| r.dt))
}

/// Mesh refinement over `grids` (`(nx, ny)` on the domain of `cfg.grid`) with
/// continuous forcing and `Δt = dt_coarse (h / h₀)²`.
pub fn spatial_study(
    cfg: &RunConfig,
    grids: &[(usize, usize)],
    dt_coarse: f64,
    workers: usize,
) -> Result<Vec<ConvergenceRow>, SolverError> {
    let (lx, ly) = (cfg.grid.lx, cfg.grid.ly);
    let h0 = lx / grids.first().map(|g| g.0).unwrap_or(1) as f64;
    let jobs: Vec<(usize, usize, f64)> = grids
        .iter()
        .map(|&(nx, ny)| {
            let h = lx / nx as f64;
            (nx, ny, dt_coarse * (h / h0).powi(2))
        })
        .collect();
    let errors = crate::solver::run_pool(workers, jobs.clone(), |(nx, ny, dt)| {
        let c = RunConfig {
            dt,
            grid: GridSpec { nx, ny, lx, ly },
            ..cfg.clone()
        };
        manufactured_error(&c, Forcing::Continuous)
    });
    let rows = jobs
        .iter()
        .zip(errors)
        .map(|(&(nx, ny, dt), e)| {
            Ok(ConvergenceRow {
                study: "space".into(),
                nx,
                ny,
                h: lx / nx as f64,
                dt,
                error: e?,
                order: None,
            })
        })
        .collect::<Result<Vec<_>, SolverError>>()?;
    Ok(with_orders(rows, |r| r.h))
}
