//! Residual and Jacobian of one implicit step, and the Newton iteration.
//!
//! Unknowns are `z = (y, w)`, `2N` values. With `δy = y − yⁿ`, lumped
//! measures `μ` (bulk) and `s` (boundary nodes), stiffness matrices `A`, `A_Γ`
//! and reactions `R`, `R_Γ`, the weak-form rows are
//!
//! ```text
//! F1 = μ δy/Δt + A w
//! F2 = μ w − μ (τ_ε δy/Δt + R(y) − g) − A y − [Γ] (s δy/Δt + s (R_Γ(y) − g_Γ) + A_Γ y)
//! ```
//!
//! Each row is divided by its node measure (`μ` for F1, `μ + s` for F2), so
//! residuals are in strong-form units and comparable across grid sizes.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use super::{Mode, Simulation, SolverError, State, StepData};

/// Numeric factorization with the Jacobian values it was computed from.
pub(crate) type Factorization = Option<(Vec<f64>, Lu<usize, f64>)>;

pub(crate) struct Pattern {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu: SymbolicLu<usize>,
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    /// Residual history ratios are available only for converged solves with
    /// at least two iterations: `‖F_k‖ / ‖F_{k−1}‖` of the last update.
    pub last_ratio: Option<f64>,
}

impl Simulation {
    /// Bulk reaction and its derivative at node value `y` (old value `y_old`).
    #[inline]
    fn bulk_reaction(&self, y: f64, y_old: f64, lambda: f64) -> (f64, f64) {
        match self.mode {
            Mode::Linearized => (lambda * y, lambda),
            Mode::Nonlinear => {
                let (b, db) = self.pair.bulk.graph.yosida_with_slope(self.eps, y);
                (b + lambda * self.pair.bulk.perturbation.value(y_old), db)
            }
        }
    }

    #[inline]
    fn boundary_reaction(&self, y: f64, y_old: f64, lambda: f64) -> (f64, f64) {
        match self.mode {
            Mode::Linearized => (lambda * y, lambda),
            Mode::Nonlinear => {
                let (b, db) = self.pair.boundary.graph.yosida_with_slope(self.pair.eta * self.eps, y);
                (b + lambda * self.pair.boundary.perturbation.value(y_old), db)
            }
        }
    }

    fn row_scales(&self) -> (Vec<f64>, Vec<f64>) {
        let grid = &self.grid;
        let mu = grid.bulk_measure();
        let s = grid.surface_measure();
        let f1 = mu.iter().map(|m| 1.0 / m).collect();
        let f2 = (0..grid.node_count())
            .map(|n| 1.0 / (mu[n] + if grid.is_boundary_node(n) { s } else { 0.0 }))
            .collect();
        (f1, f2)
    }

    /// Scaled residual `(F1, F2)` of the step from `old` to the iterate `(y, w)`.
    pub fn residual(&self, old: &State, y: &[f64], w: &[f64], data: &StepData) -> Vec<f64> {
        let grid = &self.grid;
        let n_nodes = grid.node_count();
        let mu = grid.bulk_measure();
        let s = grid.surface_measure();
        let dt = self.dt;
        let (sc1, sc2) = self.row_scales();
        let aw = grid.stiffness_apply(w);
        let ay = grid.stiffness_apply(y);
        let y_gamma: Vec<f64> = (0..grid.boundary_count()).map(|k| y[grid.boundary_node(k)]).collect();
        let ag = grid.surface_stiffness_apply(&y_gamma);
        let mut out = vec![0.0; 2 * n_nodes];
        for n in 0..n_nodes {
            let dy = y[n] - old.y.0[n];
            out[n] = sc1[n] * (mu[n] * dy / dt + aw[n]);
            let (r, _) = self.bulk_reaction(y[n], old.y.0[n], data.lambda.0[n]);
            let mut f2 = mu[n] * w[n] - mu[n] * (self.tau_eps * dy / dt + r - data.g.0[n]) - ay[n];
            if let Some(k) = grid.boundary_index(n) {
                let (rg, _) = self.boundary_reaction(y[n], old.y.0[n], data.lambda_gamma.0[k]);
                f2 -= s * dy / dt + s * (rg - data.g_gamma.0[k]) + ag[k];
            }
            out[n_nodes + n] = sc2[n] * f2;
        }
        out
    }

    /// Emits every Jacobian entry `(row, col, value)` in a fixed order;
    /// repeated positions are meant to be summed.
    fn assemble(&self, old: &State, y: &[f64], data: &StepData, mut sink: impl FnMut(usize, usize, f64)) {
        let grid = &self.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        let n_nodes = grid.node_count();
        let mu = grid.bulk_measure();
        let s = grid.surface_measure();
        let dt = self.dt;
        let (sc1, sc2) = self.row_scales();
        let (hx, hy) = (grid.hx(), grid.hy());
        let wy = hx / hy;

        // diagonal blocks first
        for n in 0..n_nodes {
            sink(n, n, sc1[n] * mu[n] / dt);
            sink(n_nodes + n, n_nodes + n, sc2[n] * mu[n]);
            let (_, dr) = self.bulk_reaction(y[n], old.y.0[n], data.lambda.0[n]);
            let mut d = mu[n] * (self.tau_eps / dt + dr);
            if let Some(k) = grid.boundary_index(n) {
                let (_, drg) = self.boundary_reaction(y[n], old.y.0[n], data.lambda_gamma.0[k]);
                d += s * (1.0 / dt + drg);
            }
            sink(n_nodes + n, n, -sc2[n] * d);
        }
        // bulk stiffness, edge by edge: A w in F1, −A y in F2
        let edge = |a: usize, b: usize, weight: f64, sink: &mut dyn FnMut(usize, usize, f64)| {
            for (p, q) in [(a, a), (b, b)] {
                sink(p, n_nodes + q, sc1[p] * weight);
                sink(n_nodes + p, q, -sc2[p] * weight);
            }
            for (p, q) in [(a, b), (b, a)] {
                sink(p, n_nodes + q, -sc1[p] * weight);
                sink(n_nodes + p, q, sc2[p] * weight);
            }
        };
        for j in 0..ny {
            let wx = if j == 0 || j == ny - 1 { 0.5 * hy / hx } else { hy / hx };
            for i in 0..nx {
                let n = j * nx + i;
                edge(n, j * nx + (i + 1) % nx, wx, &mut sink);
                if j + 1 < ny {
                    edge(n, n + nx, wy, &mut sink);
                }
            }
        }
        // surface stiffness on both components: −A_Γ y in F2
        let wg = 1.0 / hx;
        for c in 0..2 {
            for i in 0..nx {
                let a = grid.boundary_node(c * nx + i);
                let b = grid.boundary_node(c * nx + (i + 1) % nx);
                sink(n_nodes + a, a, -sc2[a] * wg);
                sink(n_nodes + b, b, -sc2[b] * wg);
                sink(n_nodes + a, b, sc2[a] * wg);
                sink(n_nodes + b, a, sc2[b] * wg);
            }
        }
    }

    /// Jacobian entries of [`Simulation::residual`] with respect to `(y, w)`.
    pub fn jacobian_entries(&self, old: &State, y: &[f64], data: &StepData) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        self.assemble(old, y, data, |r, c, v| out.push((r, c, v)));
        out
    }

    fn pattern(&self) -> Result<&Pattern, SolverError> {
        if let Some(p) = self.pattern.get() {
            return Ok(p);
        }
        let size = 2 * self.grid.node_count();
        let probe = self.initial_state();
        let data = self.data.at(&self.grid, 0.0);
        let mut idx = Vec::new();
        self.assemble(&probe, &probe.y.0, &data, |r, c, _| idx.push(Pair::new(r, c)));
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(size, size, &idx)
            .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        let lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        let _ = self.pattern.set(Pattern { symbolic, argsort, lu });
        Ok(self.pattern.get().expect("pattern just set"))
    }

    /// Solves the implicit system by Newton's method from the initial iterate
    /// `(y, w)`, which is overwritten with the converged values.
    pub(crate) fn newton(
        &self,
        old: &State,
        y: &mut [f64],
        w: &mut [f64],
        data: &StepData,
    ) -> Result<NewtonStats, SolverError> {
        let n_nodes = self.grid.node_count();
        let pattern = self.pattern()?;
        let mut values = Vec::with_capacity(pattern.argsort_len_hint());
        let mut previous: Option<f64> = None;
        let mut last_ratio = None;
        for iteration in 0..=self.newton.max_iter {
            let f = self.residual(old, y, w, data);
            let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !norm.is_finite() {
                return Err(SolverError::NewtonDivergence {
                    step: 0,
                    time: data.time,
                    iterations: iteration,
                    residual: norm,
                });
            }
            if let Some(p) = previous {
                last_ratio = Some(norm / p);
            }
            if norm <= self.newton.tol {
                return Ok(NewtonStats {
                    iterations: iteration,
                    residual: norm,
                    last_ratio,
                });
            }
            if iteration == self.newton.max_iter {
                return Err(SolverError::NewtonDivergence {
                    step: 0,
                    time: data.time,
                    iterations: iteration,
                    residual: norm,
                });
            }
            previous = Some(norm);
            values.clear();
            self.assemble(old, y, data, |_, _, v| values.push(v));
            let mut cache = self.factorization.lock().unwrap_or_else(|p| p.into_inner());
            let reuse = matches!(&*cache, Some((v, _)) if *v == values);
            if !reuse {
                let mat = SparseColMat::new_from_argsort(pattern.symbolic.clone(), &pattern.argsort, &values)
                    .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
                let lu = Lu::try_new_with_symbolic(pattern.lu.clone(), mat.as_ref())
                    .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
                *cache = Some((values.clone(), lu));
            }
            let lu = &cache.as_ref().expect("factorization present").1;
            let mut rhs = Mat::<f64>::from_fn(2 * n_nodes, 1, |i, _| -f[i]);
            lu.solve_in_place(rhs.as_mut());
            drop(cache);
            for n in 0..n_nodes {
                y[n] += rhs[(n, 0)];
                w[n] += rhs[(n_nodes + n, 0)];
            }
        }
        unreachable!("loop returns on its last iteration")
    }
}

impl Pattern {
    fn argsort_len_hint(&self) -> usize {
        self.symbolic.compute_nnz() * 2
    }
}
