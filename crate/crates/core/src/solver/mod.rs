//! Time integration of the regularized system: backward Euler with the convex
//! part (`β_ε`, Laplacians, viscosity) implicit and the Lipschitz
//! perturbation `π` explicit, solved by Newton on `(y, w)` jointly.

mod config;
mod system;

use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    validate_config, FieldPreset, Mode, NewtonGuess, NewtonSettings, PotentialSpec, RunConfig, TimeAffineField,
    ValidatedConfig, ValidationError,
};
pub use system::NewtonStats;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::grid::{BoundaryField, BulkField, GridError, StripGrid};
use crate::potential::PotentialPair;

/// Tolerance of the discrete mass invariant.
pub const MASS_TOL: f64 = 1e-10;

/// `τ_ε = τ` if `τ > 0`, else `ε`.
pub fn tau_eps(tau: f64, eps: f64) -> f64 {
    if tau > 0.0 {
        tau
    } else {
        eps
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid config: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationError>),
    #[error("Newton diverged at step {step} (t = {time}) after {iterations} iterations, residual {residual:e}")]
    NewtonDivergence {
        step: usize,
        time: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("invariant violated at step {step}: {what}")]
    InvariantViolation { step: usize, what: String },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    InvalidArgument(String),
}

/// One time level. `y_gamma` is the trace of `y`; `xi`, `xi_gamma` are the
/// selections `β_ε(y)`, `β_{Γ,ε}(y_Γ)` (zero in linearized mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub y: BulkField,
    pub y_gamma: BoundaryField,
    pub w: BulkField,
    pub xi: BulkField,
    pub xi_gamma: BoundaryField,
    pub time: f64,
}

/// Data of the equations evaluated at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepData {
    pub time: f64,
    pub lambda: BulkField,
    pub lambda_gamma: BoundaryField,
    pub g: BulkField,
    pub g_gamma: BoundaryField,
}

/// Time-dependent coefficients and sources.
pub trait DataSource: Send + Sync + std::fmt::Debug {
    fn at(&self, grid: &StripGrid, t: f64) -> StepData;
}

/// Time-affine config data `a(x) + t b(x)`, sampled once.
#[derive(Debug, Clone)]
pub struct AffineData {
    lambda: (BulkField, BulkField),
    lambda_gamma: (BoundaryField, BoundaryField),
    g: (BulkField, BulkField),
    g_gamma: (BoundaryField, BoundaryField),
}

impl AffineData {
    pub fn from_config(cfg: &RunConfig, grid: &StripGrid) -> Self {
        let bulk = |f: &TimeAffineField| (f.a.sample_bulk(grid), f.b.sample_bulk(grid));
        let boundary = |f: &TimeAffineField| (f.a.sample_boundary(grid), f.b.sample_boundary(grid));
        AffineData {
            lambda: bulk(&cfg.lambda),
            lambda_gamma: boundary(&cfg.lambda_gamma),
            g: bulk(&cfg.g),
            g_gamma: boundary(&cfg.g_gamma),
        }
    }
}

impl DataSource for AffineData {
    fn at(&self, _grid: &StripGrid, t: f64) -> StepData {
        StepData {
            time: t,
            lambda: self.lambda.0.lincomb(1.0, &self.lambda.1, t),
            lambda_gamma: self.lambda_gamma.0.lincomb(1.0, &self.lambda_gamma.1, t),
            g: self.g.0.lincomb(1.0, &self.g.1, t),
            g_gamma: self.g_gamma.0.lincomb(1.0, &self.g_gamma.1, t),
        }
    }
}

/// A validated run: grid, potentials, data and step parameters.
pub struct Simulation {
    pub(crate) validated: ValidatedConfig,
    pub(crate) grid: StripGrid,
    pub(crate) pair: PotentialPair,
    pub(crate) mode: Mode,
    pub(crate) eps: f64,
    pub(crate) tau_eps: f64,
    pub(crate) dt: f64,
    pub(crate) steps: usize,
    pub(crate) newton: NewtonSettings,
    pub(crate) data: Arc<dyn DataSource>,
    pattern: OnceLock<system::Pattern>,
    factorization: Mutex<system::Factorization>,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("config", &self.validated.config)
            .field("dt", &self.dt)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

/// Step count `round(t_final / dt)` (at least one when `t_final > 0`) and the
/// step that divides `t_final` exactly.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, f64) {
    if t_final <= 0.0 {
        return (0, dt);
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    (steps, t_final / steps as f64)
}

impl Simulation {
    pub fn new(cfg: &RunConfig) -> Result<Self, SolverError> {
        let validated = validate_config(cfg).map_err(SolverError::Validation)?;
        let data = Arc::new(AffineData::from_config(cfg, &validated.grid));
        Ok(Self::from_validated(validated, data))
    }

    /// Like [`Simulation::new`] with externally supplied data in place of the
    /// config's `lambda`, `lambda_gamma`, `g`, `g_gamma`.
    pub fn with_data(cfg: &RunConfig, data: Arc<dyn DataSource>) -> Result<Self, SolverError> {
        let validated = validate_config(cfg).map_err(SolverError::Validation)?;
        Ok(Self::from_validated(validated, data))
    }

    pub fn from_validated(validated: ValidatedConfig, data: Arc<dyn DataSource>) -> Self {
        faer::set_global_parallelism(faer::Par::Seq);
        let cfg = &validated.config;
        let (steps, dt) = step_plan(cfg.t_final, cfg.dt);
        Simulation {
            grid: validated.grid.clone(),
            pair: validated.pair.clone(),
            mode: cfg.mode,
            eps: cfg.eps,
            tau_eps: tau_eps(cfg.tau, cfg.eps),
            dt,
            steps,
            newton: cfg.newton.clone(),
            data,
            validated,
            pattern: OnceLock::new(),
            factorization: Mutex::new(None),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.validated.config
    }

    pub fn validated(&self) -> &ValidatedConfig {
        &self.validated
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    pub fn pair(&self) -> &PotentialPair {
        &self.pair
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tau_eps(&self) -> f64 {
        self.tau_eps
    }

    /// The step actually used (divides `t_final`).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn m0(&self) -> f64 {
        self.validated.m0
    }

    pub fn data(&self) -> &Arc<dyn DataSource> {
        &self.data
    }

    pub fn data_at(&self, t: f64) -> StepData {
        self.data.at(&self.grid, t)
    }

    /// `(ξ, ξ_Γ)` of a bulk field.
    pub fn selections(&self, y: &BulkField) -> (BulkField, BoundaryField) {
        let trace = self.grid.trace(y);
        match self.mode {
            Mode::Linearized => (self.grid.bulk_constant(0.0), self.grid.boundary_constant(0.0)),
            Mode::Nonlinear => (
                y.map(|v| self.pair.bulk.graph.yosida(self.eps, v)),
                trace.map(|v| self.pair.boundary_yosida(self.eps, v)),
            ),
        }
    }

    /// The chemical potential solving the second equation of the step with
    /// `δy = 0`, given the explicit level `y_old`.
    fn potential_from(&self, y: &BulkField, y_old: &BulkField, data: &StepData) -> BulkField {
        let grid = &self.grid;
        let mu = grid.bulk_measure();
        let s = grid.surface_measure();
        let ay = grid.stiffness_apply(&y.0);
        let ag = grid.surface_stiffness_apply(&grid.trace(y).0);
        let w = (0..grid.node_count())
            .map(|n| {
                let r = match self.mode {
                    Mode::Linearized => data.lambda.0[n] * y.0[n],
                    Mode::Nonlinear => {
                        self.pair.bulk.graph.yosida(self.eps, y.0[n])
                            + data.lambda.0[n] * self.pair.bulk.perturbation.value(y_old.0[n])
                    }
                };
                let mut acc = mu[n] * (r - data.g.0[n]) + ay[n];
                if let Some(k) = grid.boundary_index(n) {
                    let rg = match self.mode {
                        Mode::Linearized => data.lambda_gamma.0[k] * y.0[n],
                        Mode::Nonlinear => {
                            self.pair.boundary_yosida(self.eps, y.0[n])
                                + data.lambda_gamma.0[k] * self.pair.boundary.perturbation.value(y_old.0[n])
                        }
                    };
                    acc += s * (rg - data.g_gamma.0[k]) + ag[k];
                }
                acc / mu[n]
            })
            .collect();
        BulkField(w)
    }

    /// The state at `t = 0`: `y₀`, its trace, and `w`, `ξ`, `ξ_Γ` from one
    /// evaluation of their defining formulas.
    pub fn initial_state(&self) -> State {
        let y = self.validated.y0.clone();
        self.state_from(y, 0.0)
    }

    /// A state with the given `y` at time `t`, other fields derived from it.
    pub fn state_from(&self, y: BulkField, time: f64) -> State {
        let data = self.data_at(time);
        let w = self.potential_from(&y, &y, &data);
        let (xi, xi_gamma) = self.selections(&y);
        State {
            y_gamma: self.grid.trace(&y),
            y,
            w,
            xi,
            xi_gamma,
            time,
        }
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &State) -> Result<(State, NewtonStats), SolverError> {
        self.step_from_guess(state, state)
    }

    /// Advances `state` by one step; `older` (the level before `state`) is
    /// used by the extrapolating initial guess.
    pub fn step_with_history(&self, state: &State, older: Option<&State>) -> Result<(State, NewtonStats), SolverError> {
        match (self.newton.guess, older) {
            (NewtonGuess::Extrapolate, Some(prev)) => {
                let guess = State {
                    y: state.y.lincomb(2.0, &prev.y, -1.0),
                    w: state.w.lincomb(2.0, &prev.w, -1.0),
                    ..state.clone()
                };
                self.step_from_guess(state, &guess)
            }
            _ => self.step_from_guess(state, state),
        }
    }

    /// Advances `state` by one step, starting Newton from `guess.y`, `guess.w`.
    pub fn step_from_guess(&self, state: &State, guess: &State) -> Result<(State, NewtonStats), SolverError> {
        let time = state.time + self.dt;
        let data = self.data_at(time);
        let mut y = guess.y.0.clone();
        let mut w = guess.w.0.clone();
        let stats = self.newton(state, &mut y, &mut w, &data)?;
        let y = BulkField(y);
        let (xi, xi_gamma) = self.selections(&y);
        let next = State {
            y_gamma: self.grid.trace(&y),
            y,
            w: BulkField(w),
            xi,
            xi_gamma,
            time,
        };
        Ok((next, stats))
    }

    /// Runs to `t_final`, keeping every `save_every`-th state (and the last).
    pub fn run(&self, save_every: usize) -> Result<RunOutput, SolverError> {
        self.run_observed(save_every, |_, _| {})
    }

    /// [`Simulation::run`] with a callback on every accepted state.
    pub fn run_observed(
        &self,
        save_every: usize,
        mut observe: impl FnMut(&State, &DiagnosticsRecord),
    ) -> Result<RunOutput, SolverError> {
        if save_every == 0 {
            return Err(SolverError::InvalidArgument("save_every must be at least 1".into()));
        }
        let m0 = self.m0();
        let mut state = self.initial_state();
        let first = diagnostics::record(self, &state, None, 0)?;
        observe(&state, &first);
        let mut snapshots = vec![(0, state.clone())];
        let mut records = vec![first];
        let mut older: Option<State> = None;
        for n in 1..=self.steps {
            let (mut next, stats) = self.step_with_history(&state, older.as_ref()).map_err(|e| match e {
                SolverError::NewtonDivergence {
                    time,
                    iterations,
                    residual,
                    ..
                } => SolverError::NewtonDivergence {
                    step: n,
                    time,
                    iterations,
                    residual,
                },
                other => other,
            })?;
            if n == self.steps {
                next.time = self.config().t_final;
            }
            let rec = diagnostics::record(self, &next, Some(&state), stats.iterations)?;
            let drift = (rec.mass - m0).abs();
            if drift.is_nan() || drift > MASS_TOL {
                return Err(SolverError::InvariantViolation {
                    step: n,
                    what: format!("mass drift {drift:e} exceeds {MASS_TOL:e}"),
                });
            }
            if !rec.is_finite() {
                return Err(SolverError::InvariantViolation {
                    step: n,
                    what: "non-finite diagnostics".into(),
                });
            }
            observe(&next, &rec);
            records.push(rec);
            if n % save_every == 0 || n == self.steps {
                snapshots.push((n, next.clone()));
            }
            older = Some(std::mem::replace(&mut state, next));
        }
        Ok(RunOutput {
            config: self.config().clone(),
            grid: self.grid.clone(),
            dt: self.dt,
            tau_eps: self.tau_eps,
            save_every,
            snapshots,
            diagnostics: records,
            data: Arc::clone(&self.data),
        })
    }
}

/// Trajectory and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub grid: StripGrid,
    pub dt: f64,
    pub tau_eps: f64,
    pub save_every: usize,
    /// `(step index, state)` pairs.
    pub snapshots: Vec<(usize, State)>,
    /// One record per step, including step 0.
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub data: Arc<dyn DataSource>,
}

impl RunOutput {
    pub fn final_state(&self) -> &State {
        &self.snapshots.last().expect("a run has at least the initial state").1
    }

    /// Whether every step was saved.
    pub fn is_complete(&self) -> bool {
        self.save_every == 1
    }
}

/// Distances between the trajectories of two consecutive `ε` levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsDistance {
    pub eps_a: f64,
    pub eps_b: f64,
    /// `max_n ‖yⁿ_a − yⁿ_b‖_H`.
    pub linf_h: f64,
    /// `(Σ_n Δt ‖yⁿ_a − yⁿ_b‖_V²)^{1/2}`, `n ≥ 1`.
    pub l2_v: f64,
    /// `max_n ‖yⁿ_a − yⁿ_b‖_*`.
    pub linf_dual: f64,
}

#[derive(Debug, Clone)]
pub struct EpsStudy {
    pub eps: Vec<f64>,
    pub runs: Vec<RunOutput>,
    pub distances: Vec<EpsDistance>,
}

/// Runs `workers` independent jobs on a dedicated pool, keeping input order.
pub fn run_pool<T: Send, R: Send>(workers: usize, jobs: Vec<T>, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| jobs.into_par_iter().map(&f).collect()),
        Err(_) => jobs.into_iter().map(f).collect(),
    }
}

/// Runs `cfg` at each level of `eps_list` (non-increasing, in `(0, 1)`) and
/// measures consecutive trajectory distances.
pub fn eps_continuation(cfg: &RunConfig, eps_list: &[f64], workers: usize) -> Result<EpsStudy, SolverError> {
    if eps_list.is_empty() {
        return Err(SolverError::InvalidArgument("eps_list is empty".into()));
    }
    if eps_list.windows(2).any(|p| p[1] > p[0]) {
        return Err(SolverError::InvalidArgument("eps_list must be non-increasing".into()));
    }
    let results = run_pool(workers, eps_list.to_vec(), |eps| {
        let mut c = cfg.clone();
        c.eps = eps;
        Simulation::new(&c)?.run(1)
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut distances = Vec::with_capacity(runs.len().saturating_sub(1));
    for (k, pair) in runs.windows(2).enumerate() {
        let (linf_h, l2_v, linf_dual) = trajectory_distance(&pair[0], &pair[1])?;
        distances.push(EpsDistance {
            eps_a: eps_list[k],
            eps_b: eps_list[k + 1],
            linf_h,
            l2_v,
            linf_dual,
        });
    }
    Ok(EpsStudy {
        eps: eps_list.to_vec(),
        runs,
        distances,
    })
}

/// Discrete `L∞(0,T;H)`, `L²(0,T;V)` and `L∞(0,T;V*)` distances between two
/// complete runs on the same grid and time steps.
pub fn trajectory_distance(a: &RunOutput, b: &RunOutput) -> Result<(f64, f64, f64), SolverError> {
    if !(a.is_complete() && b.is_complete()) || a.snapshots.len() != b.snapshots.len() || a.grid != b.grid {
        return Err(SolverError::InvalidArgument("trajectories are not comparable".into()));
    }
    let grid = &a.grid;
    let (mut linf_h, mut l2_v, mut linf_dual) = (0.0f64, 0.0f64, 0.0f64);
    for ((n, sa), (_, sb)) in a.snapshots.iter().zip(&b.snapshots) {
        let d = sa.y.sub(&sb.y);
        linf_h = linf_h.max(grid.l2_norm(&d));
        linf_dual = linf_dual.max(grid.dual_norm(&d)?);
        if *n > 0 {
            l2_v += a.dt * grid.v_norm(&d).powi(2);
        }
    }
    Ok((linf_h, l2_v.sqrt(), linf_dual))
}
