use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BoundaryField, BulkField, GridError, GridSpec, StripGrid};
use crate::potential::{
    verify_coercivity, verify_compatibility, CoercivityConstants, CompatibilityReport, Interval, PotentialError,
    PotentialPair, PotentialPreset, PotentialSide, SampleGrid, DEFAULT_EPS_LEVELS,
};

/// Spatial profile used for initial data, coefficients and sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldPreset {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · cos(2π kx x / lx) · cos(π ky y / ly)`.
    Fourier {
        amplitude: f64,
        #[serde(default = "one_u32")]
        kx: u32,
        #[serde(default)]
        ky: u32,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + slope · y`.
    YLinear {
        #[serde(default)]
        offset: f64,
        slope: f64,
    },
    /// Independent uniform samples in `[mean − amplitude, mean + amplitude]`.
    Random {
        amplitude: f64,
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn one_u32() -> u32 {
    1
}

impl FieldPreset {
    pub fn constant(value: f64) -> Self {
        FieldPreset::Constant { value }
    }

    pub fn cos_x(amplitude: f64) -> Self {
        FieldPreset::Fourier {
            amplitude,
            kx: 1,
            ky: 0,
            offset: 0.0,
        }
    }

    fn point(&self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            FieldPreset::Constant { value } => value,
            FieldPreset::Fourier {
                amplitude,
                kx,
                ky,
                offset,
            } => offset + amplitude * (2.0 * PI * kx as f64 * x / lx).cos() * (PI * ky as f64 * y / ly).cos(),
            FieldPreset::YLinear { offset, slope } => offset + slope * y,
            FieldPreset::Random { .. } => unreachable!("random fields are sampled per grid"),
        }
    }

    pub fn sample_bulk(&self, grid: &StripGrid) -> BulkField {
        match *self {
            FieldPreset::Random { amplitude, mean, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                BulkField(
                    (0..grid.node_count())
                        .map(|_| mean + amplitude * (2.0 * rng.random::<f64>() - 1.0))
                        .collect(),
                )
            }
            _ => grid.bulk_from_fn(|x, y| self.point(x, y, grid.lx(), grid.ly())),
        }
    }

    pub fn sample_boundary(&self, grid: &StripGrid) -> BoundaryField {
        match *self {
            FieldPreset::Random { amplitude, mean, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                BoundaryField(
                    (0..grid.boundary_count())
                        .map(|_| mean + amplitude * (2.0 * rng.random::<f64>() - 1.0))
                        .collect(),
                )
            }
            _ => grid.boundary_from_fn(|x, y| self.point(x, y, grid.lx(), grid.ly())),
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            FieldPreset::Constant { value } => value.is_finite(),
            FieldPreset::Fourier { amplitude, offset, .. } => amplitude.is_finite() && offset.is_finite(),
            FieldPreset::YLinear { offset, slope } => offset.is_finite() && slope.is_finite(),
            FieldPreset::Random { amplitude, mean, .. } => amplitude.is_finite() && mean.is_finite(),
        }
    }
}

/// `a(x) + t · b(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAffineField {
    pub a: FieldPreset,
    #[serde(default = "zero_preset")]
    pub b: FieldPreset,
}

fn zero_preset() -> FieldPreset {
    FieldPreset::constant(0.0)
}

impl TimeAffineField {
    pub fn constant(value: f64) -> Self {
        TimeAffineField {
            a: FieldPreset::constant(value),
            b: zero_preset(),
        }
    }

    pub fn steady(a: FieldPreset) -> Self {
        TimeAffineField { a, b: zero_preset() }
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.b, FieldPreset::Constant { value } if value == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Nonlinear,
    /// `β` terms dropped, `π = id` with the `λ` coefficients treated implicitly.
    Linearized,
}

/// Initial iterate of each step's Newton solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NewtonGuess {
    /// The previous time level.
    #[default]
    Previous,
    /// Linear extrapolation from the two previous levels.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub guess: NewtonGuess,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iter: 50,
            tol: 1e-10,
            guess: NewtonGuess::Previous,
        }
    }
}

/// Potential pair as written in a config: a preset, or explicit sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSpec {
    pub preset: Option<PotentialPreset>,
    /// Quench strength of the presets that have one (`π(r) = −2c r`).
    pub c: f64,
    pub eta: f64,
    pub c_compat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk: Option<PotentialSide>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<PotentialSide>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            preset: Some(PotentialPreset::Regular),
            c: 1.0,
            eta: 1.0,
            c_compat: 0.0,
            bulk: None,
            boundary: None,
        }
    }
}

impl PotentialSpec {
    pub fn preset(preset: PotentialPreset) -> Self {
        PotentialSpec {
            preset: Some(preset),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<PotentialPair, ValidationError> {
        let mut pair = match (&self.preset, &self.bulk, &self.boundary) {
            (Some(p), None, None) => PotentialPair::preset(*p, self.c),
            (None, Some(bulk), Some(boundary)) => PotentialPair {
                bulk: bulk.clone(),
                boundary: boundary.clone(),
                eta: self.eta,
                c_compat: self.c_compat,
            },
            _ => {
                return Err(ValidationError::InvalidParameter {
                    key: "potential".into(),
                    message: "give either `preset` or both `bulk` and `boundary`".into(),
                })
            }
        };
        pair.eta = self.eta;
        pair.c_compat = self.c_compat;
        pair.validate().map_err(ValidationError::Potential)?;
        Ok(pair)
    }
}

/// Everything a run needs. Every field has a documented default, so `{}`
/// is a complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Viscosity `τ ≥ 0` (default 1).
    pub tau: f64,
    /// Yosida level `ε ∈ (0, 1)` (default 0.1).
    pub eps: f64,
    /// Requested step; adjusted down so it divides `t_final` (default 1e−3).
    pub dt: f64,
    /// Final time (default 0.1).
    pub t_final: f64,
    /// Default 64 × 32 nodes on `(0, 1) × (0, 0.5)`.
    pub grid: GridSpec,
    /// Default: the regular quartic pair.
    pub potential: PotentialSpec,
    /// Default 1.
    pub lambda: TimeAffineField,
    /// Default 1.
    pub lambda_gamma: TimeAffineField,
    /// Default 0.
    pub g: TimeAffineField,
    /// Default 0.
    pub g_gamma: TimeAffineField,
    /// Default `0.2 cos(2π x / lx)`.
    pub y0: FieldPreset,
    pub newton: NewtonSettings,
    pub mode: Mode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tau: 1.0,
            eps: 0.1,
            dt: 1e-3,
            t_final: 0.1,
            grid: GridSpec::default(),
            potential: PotentialSpec::default(),
            lambda: TimeAffineField::constant(1.0),
            lambda_gamma: TimeAffineField::constant(1.0),
            g: TimeAffineField::constant(0.0),
            g_gamma: TimeAffineField::constant(0.0),
            y0: FieldPreset::cos_x(0.2),
            newton: NewtonSettings::default(),
            mode: Mode::Nonlinear,
        }
    }
}

impl RunConfig {
    /// Range checks on scalar parameters, as `(key, message)` pairs.
    pub fn scalar_issues(&self) -> Vec<(String, String)> {
        let mut issues = Vec::new();
        let mut push = |key: &str, msg: &str| issues.push((key.to_string(), msg.to_string()));
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            push("tau", "tau must be finite and nonnegative");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            push("eps", "eps must lie in (0,1)");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            push("dt", "dt must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            push("t_final", "t_final must be finite and nonnegative");
        }
        if !(self.newton.tol.is_finite() && self.newton.tol > 0.0) {
            push("newton.tol", "newton.tol must be positive");
        }
        if self.newton.max_iter == 0 {
            push("newton.max_iter", "newton.max_iter must be at least 1");
        }
        if !(self.potential.c.is_finite() && self.potential.c >= 0.0) {
            push("potential.c", "potential.c must be nonnegative");
        }
        for (key, f) in [
            ("lambda", &self.lambda),
            ("lambda_gamma", &self.lambda_gamma),
            ("g", &self.g),
            ("g_gamma", &self.g_gamma),
        ] {
            if !(f.a.is_finite() && f.b.is_finite()) {
                push(key, "field parameters must be finite");
            }
        }
        if !self.y0.is_finite() {
            push("y0", "y0 parameters must be finite");
        }
        issues
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("{key}: {message}")]
    InvalidParameter { key: String, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Potential(PotentialError),
    #[error("{what} takes value {value} outside the closure of {domain}")]
    DomainViolation { what: String, value: f64, domain: Interval },
    #[error("mean value m0 = {m0} is not interior to D(beta_Gamma) = {domain}")]
    MeanNotInterior { m0: f64, domain: Interval },
    #[error("compatibility: {0}")]
    CompatibilityViolation(PotentialError),
    #[error("coercivity: {0}")]
    Coercivity(PotentialError),
    #[error("linearized mode needs tau > 0")]
    LinearizedNeedsViscosity,
}

impl ValidationError {
    pub fn kind(&self) -> &'static str {
        match self {
            ValidationError::InvalidParameter { .. } => "InvalidParameter",
            ValidationError::Grid(_) => "Grid",
            ValidationError::Potential(_) => "Potential",
            ValidationError::DomainViolation { .. } => "DomainViolation",
            ValidationError::MeanNotInterior { .. } => "MeanNotInterior",
            ValidationError::CompatibilityViolation(_) => "CompatibilityViolation",
            ValidationError::Coercivity(_) => "CoercivityFailure",
            ValidationError::LinearizedNeedsViscosity => "LinearizedNeedsViscosity",
        }
    }
}

/// A config that passed [`validate_config`], with everything derived from it.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub config: RunConfig,
    pub grid: StripGrid,
    pub pair: PotentialPair,
    pub y0: BulkField,
    pub m0: f64,
    pub compatibility: Option<CompatibilityReport>,
    pub coercivity: Option<CoercivityConstants>,
    /// Non-fatal remarks (e.g. the τ = 0 substitution).
    pub notes: Vec<String>,
}

/// Sample density of the structural checks run during validation.
const VALIDATION_SAMPLES: usize = 801;

/// Checks the data hypotheses: scalar ranges, admissible initial datum,
/// interior mean, and the sampled compatibility and coercivity inequalities.
/// All failures are collected.
pub fn validate_config(cfg: &RunConfig) -> Result<ValidatedConfig, Vec<ValidationError>> {
    let mut errors: Vec<ValidationError> = cfg
        .scalar_issues()
        .into_iter()
        .map(|(key, message)| ValidationError::InvalidParameter { key, message })
        .collect();
    let grid = match StripGrid::from_spec(&cfg.grid) {
        Ok(g) => Some(g),
        Err(e) => {
            errors.push(e.into());
            None
        }
    };
    let pair = match cfg.potential.resolve() {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    if cfg.mode == Mode::Linearized && cfg.tau <= 0.0 {
        errors.push(ValidationError::LinearizedNeedsViscosity);
    }
    let (Some(grid), Some(pair)) = (grid, pair) else {
        return Err(errors);
    };
    let y0 = cfg.y0.sample_bulk(&grid);
    let m0 = grid.mean_value(&y0);
    let mut notes = Vec::new();
    let mut compatibility = None;
    let mut coercivity = None;
    if cfg.tau == 0.0 {
        notes.push(format!("tau = 0: solving with tau_eps = eps = {}", cfg.eps));
    }
    if cfg.mode == Mode::Nonlinear {
        let bulk_dom = pair.bulk.graph.domain();
        let boundary_dom = pair.boundary.graph.domain();
        if let Some(v) = y0.0.iter().copied().find(|v| !bulk_dom.closure_contains(*v)) {
            errors.push(ValidationError::DomainViolation {
                what: "y0".into(),
                value: v,
                domain: bulk_dom,
            });
        }
        let trace = grid.trace(&y0);
        if let Some(v) = trace.0.iter().copied().find(|v| !boundary_dom.closure_contains(*v)) {
            errors.push(ValidationError::DomainViolation {
                what: "trace of y0".into(),
                value: v,
                domain: boundary_dom,
            });
        }
        let mean_ok = boundary_dom.interior_contains(m0);
        if !mean_ok {
            errors.push(ValidationError::MeanNotInterior {
                m0,
                domain: boundary_dom,
            });
        }
        let samples = SampleGrid::covering(&boundary_dom, VALIDATION_SAMPLES);
        match verify_compatibility(&pair, &DEFAULT_EPS_LEVELS, &samples) {
            Ok(report) => compatibility = Some(report),
            Err(e) => errors.push(ValidationError::CompatibilityViolation(e)),
        }
        if mean_ok {
            match verify_coercivity(&pair, m0, &DEFAULT_EPS_LEVELS, &samples) {
                Ok(k) => coercivity = Some(k),
                Err(e) => errors.push(ValidationError::Coercivity(e)),
            }
        }
    } else {
        notes.push("linearized mode: potentials are ignored".into());
    }
    if errors.is_empty() {
        Ok(ValidatedConfig {
            config: cfg.clone(),
            grid,
            pair,
            y0,
            m0,
            compatibility,
            coercivity,
            notes,
        })
    } else {
        Err(errors)
    }
}
