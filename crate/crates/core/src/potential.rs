//! Convex potentials, their maximal monotone graphs, and Yosida regularization.
//!
//! A graph `β = ∂β̂` is one of three kinds: an odd polynomial (everywhere
//! defined), the logarithmic graph `ln(1+r) − ln(1−r)` on `(−1, 1)`, or the
//! subdifferential of the indicator of a closed interval. The Yosida
//! approximation at level `ε` is `β_ε(r) = (r − J_ε(r)) / ε` where the
//! resolvent `J_ε(r)` solves `J + ε β(J) ∋ r`.
//!
//! Bulk and boundary graphs are paired in [`PotentialPair`]; the boundary
//! graph is always regularized at level `η ε`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance of the resolvent root finder.
pub const RESOLVENT_TOL: f64 = 1e-13;

/// Slack allowed when comparing sampled inequalities.
pub const SAMPLE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("r = {r} lies outside the domain of the graph")]
    OutOfDomain { r: f64 },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("compatibility violated at r = {r}, eps = {eps} (slack {slack:e})")]
    CompatibilityViolation { r: f64, eps: f64, slack: f64 },
    #[error("boundary domain {boundary} is not contained in bulk domain {bulk}")]
    DomainNotContained { bulk: Interval, boundary: Interval },
    #[error("coercivity failure: {0}")]
    CoercivityFailure(String),
}

/// An interval of the real line with open/closed endpoint flags.
/// Infinite endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lower_closed: false,
        upper_closed: false,
    };

    pub fn open(lower: f64, upper: f64) -> Self {
        Interval {
            lower,
            upper,
            lower_closed: false,
            upper_closed: false,
        }
    }

    pub fn closed(lower: f64, upper: f64) -> Self {
        Interval {
            lower,
            upper,
            lower_closed: lower.is_finite(),
            upper_closed: upper.is_finite(),
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lower_closed {
            r >= self.lower
        } else {
            r > self.lower
        };
        let below = if self.upper_closed {
            r <= self.upper
        } else {
            r < self.upper
        };
        above && below
    }

    pub fn interior_contains(&self, r: f64) -> bool {
        r > self.lower && r < self.upper
    }

    pub fn closure_contains(&self, r: f64) -> bool {
        r >= self.lower && r <= self.upper
    }

    /// Set inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lower_ok =
            self.lower > other.lower || (self.lower == other.lower && (other.lower_closed || !self.lower_closed));
        let upper_ok =
            self.upper < other.upper || (self.upper == other.upper && (other.upper_closed || !self.upper_closed));
        lower_ok && upper_ok
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Distance from `r` to the nearest finite endpoint (infinite if none).
    pub fn distance_to_boundary(&self, r: f64) -> f64 {
        (r - self.lower).min(self.upper - r)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lower_closed { '[' } else { '(' },
            self.lower,
            self.upper,
            if self.upper_closed { ']' } else { ')' }
        )
    }
}

/// A maximal monotone graph given as the subdifferential of a convex,
/// proper, l.s.c. potential with `β̂(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphRepr", into = "GraphRepr")]
pub enum MonotoneGraph {
    /// `β(r) = Σ_k c_k r^(2k+1)` with every `c_k ≥ 0`.
    Polynomial { coefficients: Vec<f64> },
    /// `β(r) = ln(1+r) − ln(1−r)` on `(−1, 1)`.
    Logarithmic,
    /// `β = ∂I_[lower, upper]`, with `lower ≤ 0 ≤ upper`.
    Indicator { lower: f64, upper: f64 },
}

/// Serialized form; the empty struct variant keeps unknown keys rejected.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum GraphRepr {
    Polynomial { coefficients: Vec<f64> },
    Logarithmic {},
    Indicator { lower: f64, upper: f64 },
}

impl From<GraphRepr> for MonotoneGraph {
    fn from(r: GraphRepr) -> Self {
        match r {
            GraphRepr::Polynomial { coefficients } => MonotoneGraph::Polynomial { coefficients },
            GraphRepr::Logarithmic {} => MonotoneGraph::Logarithmic,
            GraphRepr::Indicator { lower, upper } => MonotoneGraph::Indicator { lower, upper },
        }
    }
}

impl From<MonotoneGraph> for GraphRepr {
    fn from(g: MonotoneGraph) -> Self {
        match g {
            MonotoneGraph::Polynomial { coefficients } => GraphRepr::Polynomial { coefficients },
            MonotoneGraph::Logarithmic => GraphRepr::Logarithmic {},
            MonotoneGraph::Indicator { lower, upper } => GraphRepr::Indicator { lower, upper },
        }
    }
}

impl MonotoneGraph {
    /// The cubic graph `β(r) = r³` of the regular quartic double well.
    pub fn cubic() -> Self {
        MonotoneGraph::Polynomial {
            coefficients: vec![0.0, 1.0],
        }
    }

    pub fn obstacle(lower: f64, upper: f64) -> Self {
        MonotoneGraph::Indicator { lower, upper }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        match self {
            MonotoneGraph::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(PotentialError::InvalidGraph("polynomial needs coefficients".into()));
                }
                if coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return Err(PotentialError::InvalidGraph(
                        "polynomial coefficients must be finite and nonnegative".into(),
                    ));
                }
                Ok(())
            }
            MonotoneGraph::Logarithmic => Ok(()),
            MonotoneGraph::Indicator { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && *lower <= 0.0 && *upper >= 0.0 && lower < upper) {
                    return Err(PotentialError::InvalidGraph(format!(
                        "indicator interval [{lower}, {upper}] must be finite, nondegenerate and contain 0"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn domain(&self) -> Interval {
        match self {
            MonotoneGraph::Polynomial { .. } => Interval::REAL_LINE,
            MonotoneGraph::Logarithmic => Interval::open(-1.0, 1.0),
            MonotoneGraph::Indicator { lower, upper } => Interval::closed(*lower, *upper),
        }
    }

    /// The convex potential `β̂`; `+∞` off its effective domain.
    pub fn primitive(&self, r: f64) -> f64 {
        match self {
            MonotoneGraph::Polynomial { coefficients } => {
                let r2 = r * r;
                let mut power = r2;
                let mut acc = 0.0;
                for (k, c) in coefficients.iter().enumerate() {
                    acc += c * power / (2 * k + 2) as f64;
                    power *= r2;
                }
                acc
            }
            MonotoneGraph::Logarithmic => {
                if r.abs() > 1.0 {
                    f64::INFINITY
                } else {
                    xlogx(1.0 + r) + xlogx(1.0 - r)
                }
            }
            MonotoneGraph::Indicator { lower, upper } => {
                if r >= *lower && r <= *upper {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The element of `β(r)` of least modulus.
    pub fn minimal_section(&self, r: f64) -> Result<f64, PotentialError> {
        if !self.domain().contains(r) {
            return Err(PotentialError::OutOfDomain { r });
        }
        Ok(match self {
            MonotoneGraph::Polynomial { coefficients } => odd_poly(coefficients, r),
            MonotoneGraph::Logarithmic => (1.0 + r).ln() - (1.0 - r).ln(),
            MonotoneGraph::Indicator { .. } => 0.0,
        })
    }

    /// `β'` on the domain interior; `+∞` at the logarithmic singularities.
    fn section_slope(&self, r: f64) -> f64 {
        match self {
            MonotoneGraph::Polynomial { coefficients } => odd_poly_slope(coefficients, r),
            MonotoneGraph::Logarithmic => {
                let d = 1.0 - r * r;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    2.0 / d
                }
            }
            MonotoneGraph::Indicator { .. } => 0.0,
        }
    }

    /// The resolvent `J_ε(r)`, the unique solution of `J + ε β(J) ∋ r`.
    pub fn resolvent(&self, eps: f64, r: f64) -> f64 {
        debug_assert!(eps > 0.0);
        match self {
            MonotoneGraph::Indicator { lower, upper } => r.clamp(*lower, *upper),
            MonotoneGraph::Polynomial { coefficients } => {
                if r == 0.0 {
                    return 0.0;
                }
                let (lo, hi) = (r.min(0.0), r.max(0.0));
                safeguarded_root(
                    |j| j + eps * odd_poly(coefficients, j) - r,
                    |j| 1.0 + eps * odd_poly_slope(coefficients, j),
                    lo,
                    hi,
                )
            }
            MonotoneGraph::Logarithmic => {
                if r == 0.0 {
                    return 0.0;
                }
                let (lo, hi) = (r.clamp(-1.0, 0.0), r.clamp(0.0, 1.0));
                safeguarded_root(
                    |j| {
                        if j >= 1.0 {
                            f64::INFINITY
                        } else if j <= -1.0 {
                            f64::NEG_INFINITY
                        } else {
                            j + eps * ((1.0 + j).ln() - (1.0 - j).ln()) - r
                        }
                    },
                    |j| 1.0 + eps * 2.0 / (1.0 - j * j),
                    lo,
                    hi,
                )
            }
        }
    }

    /// The Yosida approximation `β_ε(r) = (r − J_ε(r)) / ε`.
    pub fn yosida(&self, eps: f64, r: f64) -> f64 {
        (r - self.resolvent(eps, r)) / eps
    }

    /// Derivative of `β_ε` (a generalized derivative at the kinks of the
    /// indicator kind, where the interior value 0 is returned).
    pub fn yosida_slope(&self, eps: f64, r: f64) -> f64 {
        match self {
            MonotoneGraph::Indicator { lower, upper } => {
                if r < *lower || r > *upper {
                    1.0 / eps
                } else {
                    0.0
                }
            }
            MonotoneGraph::Polynomial { .. } => {
                let s = self.section_slope(self.resolvent(eps, r));
                s / (1.0 + eps * s)
            }
            MonotoneGraph::Logarithmic => {
                // β'(J) / (1 + ε β'(J)) with β'(J) = 2 / (1 − J²); stays finite as J → ±1
                let j = self.resolvent(eps, r);
                2.0 / ((1.0 - j * j).max(0.0) + 2.0 * eps)
            }
        }
    }

    /// `(β_ε(r), β_ε'(r))` from a single resolvent evaluation.
    pub fn yosida_with_slope(&self, eps: f64, r: f64) -> (f64, f64) {
        let j = self.resolvent(eps, r);
        let slope = match self {
            MonotoneGraph::Indicator { lower, upper } => {
                if r < *lower || r > *upper {
                    1.0 / eps
                } else {
                    0.0
                }
            }
            MonotoneGraph::Polynomial { .. } => {
                let s = self.section_slope(j);
                s / (1.0 + eps * s)
            }
            MonotoneGraph::Logarithmic => 2.0 / ((1.0 - j * j).max(0.0) + 2.0 * eps),
        };
        ((r - j) / eps, slope)
    }

    /// `B̂_ε(r) = ∫₀ʳ β_ε(s) ds`, evaluated as the Moreau envelope
    /// `β̂(J) + (r − J)² / (2ε)` at `J = J_ε(r)`.
    pub fn yosida_primitive(&self, eps: f64, r: f64) -> f64 {
        let j = self.resolvent(eps, r);
        let d = r - j;
        self.primitive(j) + d * d / (2.0 * eps)
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn odd_poly(coefficients: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    let mut power = r;
    let mut acc = 0.0;
    for c in coefficients {
        acc += c * power;
        power *= r2;
    }
    acc
}

fn odd_poly_slope(coefficients: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    let mut power = 1.0;
    let mut acc = 0.0;
    for (k, c) in coefficients.iter().enumerate() {
        acc += c * (2 * k + 1) as f64 * power;
        power *= r2;
    }
    acc
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`:
/// Newton steps kept inside the bracket, bisection otherwise.
fn safeguarded_root(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= RESOLVENT_TOL {
            return 0.5 * (lo + hi);
        }
        let slope = df(x);
        let step = fx / slope;
        let candidate = x - step;
        if slope.is_finite() && slope > 0.0 && candidate > lo && candidate < hi {
            x = candidate;
            if step.abs() <= 1e-3 * RESOLVENT_TOL {
                return x;
            }
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    x
}

/// The Lipschitz (concave-energy) perturbation `π` with `π(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LipschitzPerturbation {
    /// `π(r) = slope · r`.
    Linear { slope: f64 },
    /// `π(r) = slope · clamp(r, lower, upper)`.
    AffineTruncated { slope: f64, lower: f64, upper: f64 },
}

impl LipschitzPerturbation {
    pub fn validate(&self) -> Result<(), PotentialError> {
        match self {
            LipschitzPerturbation::Linear { slope } if slope.is_finite() => Ok(()),
            LipschitzPerturbation::AffineTruncated { slope, lower, upper }
                if slope.is_finite() && *lower <= 0.0 && *upper >= 0.0 && lower.is_finite() && upper.is_finite() =>
            {
                Ok(())
            }
            other => Err(PotentialError::InvalidPerturbation(format!("{other:?}"))),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            LipschitzPerturbation::Linear { slope } => slope * r,
            LipschitzPerturbation::AffineTruncated { slope, lower, upper } => slope * r.clamp(*lower, *upper),
        }
    }

    /// `π̂(r) = ∫₀ʳ π(s) ds`.
    pub fn primitive(&self, r: f64) -> f64 {
        match self {
            LipschitzPerturbation::Linear { slope } => 0.5 * slope * r * r,
            LipschitzPerturbation::AffineTruncated { slope, lower, upper } => {
                let c = r.clamp(*lower, *upper);
                slope * (0.5 * c * c + c * (r - c))
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            LipschitzPerturbation::Linear { slope } | LipschitzPerturbation::AffineTruncated { slope, .. } => {
                slope.abs()
            }
        }
    }
}

/// One side (bulk or boundary) of the structure: convex graph plus perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSide {
    pub graph: MonotoneGraph,
    pub perturbation: LipschitzPerturbation,
}

/// Named potential pairs shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialPreset {
    /// `W(r) = (r² − 1)² / 4` on both sides: `β(r) = r³`, `π(r) = −r`.
    Regular,
    /// Logarithmic graph with `π(r) = −2c r` on both sides.
    Logarithmic,
    /// Indicator of `[−1, 1]` with `π(r) = −2c r` on both sides.
    DoubleObstacle,
    /// Obstacle in the bulk, logarithmic on the boundary.
    ObstacleLog,
    /// Logarithmic bulk dominated by an obstacle boundary. Violates the
    /// compatibility condition and is kept as a negative example.
    LogObstacle,
}

impl PotentialPreset {
    pub const ALL: [PotentialPreset; 5] = [
        PotentialPreset::Regular,
        PotentialPreset::Logarithmic,
        PotentialPreset::DoubleObstacle,
        PotentialPreset::ObstacleLog,
        PotentialPreset::LogObstacle,
    ];
}

/// Bulk and boundary structure with the compatibility constants `(η, C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialPair {
    pub bulk: PotentialSide,
    pub boundary: PotentialSide,
    pub eta: f64,
    pub c_compat: f64,
}

impl PotentialPair {
    pub fn new(bulk: PotentialSide, boundary: PotentialSide, eta: f64, c_compat: f64) -> Result<Self, PotentialError> {
        let pair = PotentialPair {
            bulk,
            boundary,
            eta,
            c_compat,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Both sides share the same graph and perturbation.
    pub fn symmetric(graph: MonotoneGraph, perturbation: LipschitzPerturbation) -> Self {
        let side = PotentialSide { graph, perturbation };
        PotentialPair {
            bulk: side.clone(),
            boundary: side,
            eta: 1.0,
            c_compat: 0.0,
        }
    }

    /// `c` scales the concave part where the preset has one (`π(r) = −2c r`).
    pub fn preset(preset: PotentialPreset, c: f64) -> Self {
        let quench = LipschitzPerturbation::Linear { slope: -2.0 * c };
        let obstacle = MonotoneGraph::obstacle(-1.0, 1.0);
        match preset {
            PotentialPreset::Regular => {
                PotentialPair::symmetric(MonotoneGraph::cubic(), LipschitzPerturbation::Linear { slope: -1.0 })
            }
            PotentialPreset::Logarithmic => PotentialPair::symmetric(MonotoneGraph::Logarithmic, quench),
            PotentialPreset::DoubleObstacle => PotentialPair::symmetric(obstacle, quench),
            PotentialPreset::ObstacleLog => PotentialPair {
                bulk: PotentialSide {
                    graph: obstacle,
                    perturbation: quench.clone(),
                },
                boundary: PotentialSide {
                    graph: MonotoneGraph::Logarithmic,
                    perturbation: quench,
                },
                eta: 1.0,
                c_compat: 0.0,
            },
            PotentialPreset::LogObstacle => PotentialPair {
                bulk: PotentialSide {
                    graph: MonotoneGraph::Logarithmic,
                    perturbation: quench.clone(),
                },
                boundary: PotentialSide {
                    graph: obstacle,
                    perturbation: quench,
                },
                eta: 1.0,
                c_compat: 0.0,
            },
        }
    }

    /// Structural checks only; the compatibility inequality is checked by
    /// [`verify_compatibility`].
    pub fn validate(&self) -> Result<(), PotentialError> {
        self.bulk.graph.validate()?;
        self.boundary.graph.validate()?;
        self.bulk.perturbation.validate()?;
        self.boundary.perturbation.validate()?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(PotentialError::InvalidGraph(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.c_compat.is_finite() && self.c_compat >= 0.0) {
            return Err(PotentialError::InvalidGraph(format!(
                "c_compat must be nonnegative, got {}",
                self.c_compat
            )));
        }
        Ok(())
    }

    pub fn bulk_yosida(&self, eps: f64, r: f64) -> f64 {
        self.bulk.graph.yosida(eps, r)
    }

    /// Boundary graph regularized at level `η ε`.
    pub fn boundary_yosida(&self, eps: f64, r: f64) -> f64 {
        self.boundary.graph.yosida(self.eta * eps, r)
    }

    pub fn boundary_yosida_slope(&self, eps: f64, r: f64) -> f64 {
        self.boundary.graph.yosida_slope(self.eta * eps, r)
    }

    pub fn boundary_yosida_primitive(&self, eps: f64, r: f64) -> f64 {
        self.boundary.graph.yosida_primitive(self.eta * eps, r)
    }
}

/// Sample points for the sampled structural checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid(pub Vec<f64>);

impl SampleGrid {
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2);
        SampleGrid((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
    }

    /// Covers `domain` with a unit margin on each side, plus points clustered
    /// at the finite endpoints.
    pub fn covering(domain: &Interval, n: usize) -> Self {
        let lo = if domain.lower.is_finite() {
            domain.lower - 1.0
        } else {
            -3.0
        };
        let hi = if domain.upper.is_finite() {
            domain.upper + 1.0
        } else {
            3.0
        };
        let mut points = SampleGrid::linspace(lo, hi, n).0;
        for end in [domain.lower, domain.upper] {
            if end.is_finite() {
                for k in 1..=8 {
                    let d = 10f64.powi(-k);
                    points.push(end - d);
                    points.push(end + d);
                }
                points.push(end);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        SampleGrid(points)
    }
}

/// Default ε levels used by the sampled checks.
pub const DEFAULT_EPS_LEVELS: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub eta: f64,
    pub c_compat: f64,
    /// `max (|β_ε(r)| − η|β_Γ,ε(r)| − C)` over the samples.
    pub max_slack: f64,
    pub witness_r: f64,
    pub witness_eps: f64,
    pub samples: usize,
}

/// Checks `D(β_Γ) ⊆ D(β)` and `|β_ε(r)| ≤ η|β_Γ,ε(r)| + C` on every sample.
pub fn verify_compatibility(
    pair: &PotentialPair,
    eps_list: &[f64],
    samples: &SampleGrid,
) -> Result<CompatibilityReport, PotentialError> {
    let mut report = CompatibilityReport {
        eta: pair.eta,
        c_compat: pair.c_compat,
        max_slack: f64::NEG_INFINITY,
        witness_r: f64::NAN,
        witness_eps: f64::NAN,
        samples: 0,
    };
    for &eps in eps_list {
        for &r in &samples.0 {
            let slack = pair.bulk_yosida(eps, r).abs() - pair.eta * pair.boundary_yosida(eps, r).abs() - pair.c_compat;
            report.samples += 1;
            if slack > report.max_slack {
                report.max_slack = slack;
                report.witness_r = r;
                report.witness_eps = eps;
            }
        }
    }
    if report.max_slack > SAMPLE_SLACK {
        return Err(PotentialError::CompatibilityViolation {
            r: report.witness_r,
            eps: report.witness_eps,
            slack: report.max_slack,
        });
    }
    let (bulk, boundary) = (pair.bulk.graph.domain(), pair.boundary.graph.domain());
    if !boundary.is_subset_of(&bulk) {
        return Err(PotentialError::DomainNotContained { bulk, boundary });
    }
    Ok(report)
}

/// Constants of the coercivity inequality `β_ε(r)(r − m₀) ≥ δ₀|β_ε(r)| − C₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityConstants {
    pub delta0: f64,
    pub c0: f64,
    pub m0: f64,
}

const MIN_DELTA0: f64 = 1e-6;
const MAX_C0: f64 = 1e6;

/// Smallest admissible `C₀` for a given `δ₀` over the sampled family.
fn coercivity_c0(beta: impl Fn(f64, f64) -> f64, m0: f64, delta0: f64, eps_list: &[f64], samples: &SampleGrid) -> f64 {
    let mut c0: f64 = 0.0;
    for &eps in eps_list {
        for &r in &samples.0 {
            let b = beta(eps, r);
            c0 = c0.max(delta0 * b.abs() - b * (r - m0));
        }
    }
    c0
}

/// Finds `(δ₀, C₀)` valid for both the bulk family `β_ε` and the boundary
/// family `β_Γ,ε` on the samples. `δ₀` is the largest power of two in
/// `[1e−6, 1]` whose matching `C₀` stays below `1e6`.
pub fn verify_coercivity(
    pair: &PotentialPair,
    m0: f64,
    eps_list: &[f64],
    samples: &SampleGrid,
) -> Result<CoercivityConstants, PotentialError> {
    let boundary_domain = pair.boundary.graph.domain();
    if !boundary_domain.interior_contains(m0) {
        return Err(PotentialError::CoercivityFailure(format!(
            "mean value {m0} is not interior to D(beta_Gamma) = {boundary_domain}"
        )));
    }
    let mut delta0 = 1.0;
    while delta0 >= MIN_DELTA0 {
        let bulk = coercivity_c0(|e, r| pair.bulk_yosida(e, r), m0, delta0, eps_list, samples);
        let boundary = coercivity_c0(|e, r| pair.boundary_yosida(e, r), m0, delta0, eps_list, samples);
        let c0 = bulk.max(boundary);
        if c0 <= MAX_C0 {
            return Ok(CoercivityConstants { delta0, c0, m0 });
        }
        delta0 *= 0.5;
    }
    Err(PotentialError::CoercivityFailure(format!(
        "no constants with delta0 >= {MIN_DELTA0} and C0 <= {MAX_C0} for m0 = {m0}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisection_resolvent(graph: &MonotoneGraph, eps: f64, r: f64) -> f64 {
        let dom = graph.domain();
        let (mut lo, mut hi) = (r.min(0.0).max(dom.lower), r.max(0.0).min(dom.upper));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let value = mid + eps * graph.minimal_section(mid).unwrap_or(f64::NAN) - r;
            if value < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn minimal_section_examples() {
        let ind = MonotoneGraph::obstacle(-1.0, 1.0);
        assert_eq!(ind.minimal_section(0.5).unwrap(), 0.0);
        assert_eq!(ind.minimal_section(1.0).unwrap(), 0.0);
        assert_eq!(ind.minimal_section(-1.0).unwrap(), 0.0);
        assert_eq!(MonotoneGraph::Logarithmic.minimal_section(0.0).unwrap(), 0.0);
        assert_eq!(MonotoneGraph::cubic().minimal_section(2.0).unwrap(), 8.0);
    }

    #[test]
    fn minimal_section_out_of_domain() {
        assert_eq!(
            MonotoneGraph::obstacle(-1.0, 1.0).minimal_section(1.5),
            Err(PotentialError::OutOfDomain { r: 1.5 })
        );
        assert!(MonotoneGraph::Logarithmic.minimal_section(1.0).is_err());
        assert!(MonotoneGraph::Logarithmic.minimal_section(-1.0).is_err());
    }

    #[test]
    fn resolvent_examples() {
        let ind = MonotoneGraph::obstacle(-1.0, 1.0);
        assert_eq!(ind.resolvent(0.5, 1.5), 1.0);
        assert!((bisection_resolvent(&ind, 0.5, 1.5) - 1.0).abs() < 1e-12);
        for g in [ind, MonotoneGraph::Logarithmic, MonotoneGraph::cubic()] {
            assert_eq!(g.resolvent(0.3, 0.0), 0.0);
        }
        let cubic = MonotoneGraph::cubic();
        assert!((cubic.resolvent(1.0, 2.0) - 1.0).abs() < 1e-13);
        assert!((bisection_resolvent(&cubic, 1.0, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn yosida_examples() {
        let ind = MonotoneGraph::obstacle(-1.0, 1.0);
        assert_eq!(ind.yosida(0.5, 1.5), 1.0);
        for g in [ind, MonotoneGraph::Logarithmic, MonotoneGraph::cubic()] {
            assert_eq!(g.yosida(0.17, 0.0), 0.0);
        }
        let log = MonotoneGraph::Logarithmic;
        let oracle = (0.9 - bisection_resolvent(&log, 0.1, 0.9)) / 0.1;
        assert!((log.yosida(0.1, 0.9) - oracle).abs() < 1e-10);
    }

    #[test]
    fn boundary_yosida_examples() {
        let pair = PotentialPair::preset(PotentialPreset::Regular, 1.0);
        for r in [-2.0, -0.3, 0.7, 3.0] {
            assert_eq!(pair.boundary_yosida(0.1, r), pair.bulk_yosida(0.1, r));
        }
        let mut pair = PotentialPair::preset(PotentialPreset::DoubleObstacle, 1.0);
        pair.eta = 2.0;
        assert!((pair.boundary_yosida(0.25, 2.0) - 2.0).abs() < 1e-15);
        assert_eq!(pair.boundary_yosida(0.25, 0.0), 0.0);
    }

    #[test]
    fn yosida_primitive_examples() {
        let ind = MonotoneGraph::obstacle(-1.0, 1.0);
        assert_eq!(ind.yosida_primitive(0.5, 0.0), 0.0);
        assert!((ind.yosida_primitive(0.5, 2.0) - 1.0).abs() < 1e-15);
        // ∫₀¹ β_ε by composite Simpson on the smooth cubic family
        let cubic = MonotoneGraph::cubic();
        let mut last = 0.0;
        for eps in [0.4, 0.2, 0.1] {
            let n = 2000;
            let h = 1.0 / n as f64;
            let mut sum = cubic.yosida(eps, 0.0) + cubic.yosida(eps, 1.0);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * cubic.yosida(eps, k as f64 * h);
            }
            let quad = sum * h / 3.0;
            let closed = cubic.yosida_primitive(eps, 1.0);
            assert!((quad - closed).abs() < 1e-10 * closed.max(1.0), "{quad} vs {closed}");
            assert!(closed <= 0.25 && closed > last);
            last = closed;
        }
    }

    #[test]
    fn log_resolvent_saturates_near_singularity() {
        let log = MonotoneGraph::Logarithmic;
        let j = log.resolvent(0.01, 5.0);
        assert!(j <= 1.0 && j > 0.99);
        assert!((log.yosida(0.01, 5.0) - (5.0 - j) / 0.01).abs() < 1e-9);
        assert!(log.yosida_slope(0.01, 5.0) <= 100.0 + 1e-9);
        assert!(log.yosida_primitive(0.01, 5.0).is_finite());
    }

    #[test]
    fn yosida_slope_matches_difference_quotient() {
        for g in [
            MonotoneGraph::Logarithmic,
            MonotoneGraph::cubic(),
            MonotoneGraph::obstacle(-1.0, 0.5),
        ] {
            for &r in &[-1.7, -0.6, 0.2, 0.45, 0.8, 2.3] {
                let h = 1e-6;
                let fd = (g.yosida(0.1, r + h) - g.yosida(0.1, r - h)) / (2.0 * h);
                assert!(
                    (fd - g.yosida_slope(0.1, r)).abs() < 1e-5 * fd.abs().max(1.0),
                    "{g:?} {r}"
                );
            }
        }
    }

    #[test]
    fn perturbation_primitives() {
        let p = LipschitzPerturbation::AffineTruncated {
            slope: -2.0,
            lower: -1.0,
            upper: 0.5,
        };
        assert_eq!(p.value(0.0), 0.0);
        assert_eq!(p.value(2.0), -1.0);
        assert_eq!(p.lipschitz(), 2.0);
        for &r in &[-3.0, -0.4, 0.3, 1.2] {
            let n = 4000;
            let h = r / n as f64;
            let trap: f64 = (0..n)
                .map(|k| 0.5 * h * (p.value(k as f64 * h) + p.value((k + 1) as f64 * h)))
                .sum();
            assert!((trap - p.primitive(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn compatibility_examples() {
        let eps = DEFAULT_EPS_LEVELS;
        let same = PotentialPair::preset(PotentialPreset::Logarithmic, 1.0);
        let s = SampleGrid::covering(&same.boundary.graph.domain(), 801);
        assert!(verify_compatibility(&same, &eps, &s).is_ok());

        let ok = PotentialPair::preset(PotentialPreset::ObstacleLog, 1.0);
        let s = SampleGrid::covering(&ok.boundary.graph.domain(), 801);
        let report = verify_compatibility(&ok, &eps, &s).unwrap();
        assert!(report.max_slack <= SAMPLE_SLACK);

        let bad = PotentialPair::preset(PotentialPreset::LogObstacle, 1.0);
        let s = SampleGrid::covering(&bad.boundary.graph.domain(), 801);
        match verify_compatibility(&bad, &eps, &s) {
            Err(PotentialError::CompatibilityViolation { slack, .. }) => assert!(slack > 0.0),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn coercivity_examples() {
        let eps = DEFAULT_EPS_LEVELS;
        let obstacle = PotentialPair::preset(PotentialPreset::DoubleObstacle, 1.0);
        let s = SampleGrid::covering(&obstacle.boundary.graph.domain(), 801);
        let k = verify_coercivity(&obstacle, 0.0, &eps, &s).unwrap();
        assert_eq!((k.delta0, k.c0), (1.0, 0.0));

        // β_ε vanishes on every sample: the inequality holds with C₀ = 0
        let tiny = SampleGrid::linspace(-0.5, 0.5, 11);
        let k = verify_coercivity(&obstacle, 0.2, &eps, &tiny).unwrap();
        assert_eq!(k.c0, 0.0);

        let log = PotentialPair::preset(PotentialPreset::Logarithmic, 1.0);
        let s = SampleGrid::covering(&log.boundary.graph.domain(), 801);
        let centred = verify_coercivity(&log, 0.0, &eps, &s).unwrap();
        let skewed = verify_coercivity(&log, 0.999, &eps, &s).unwrap();
        assert!(skewed.c0 > 10.0 * centred.c0.max(1e-3), "{centred:?} {skewed:?}");
        assert!(verify_coercivity(&log, 1.0, &eps, &s).is_err());
    }

    #[test]
    fn interval_inclusion() {
        let closed = Interval::closed(-1.0, 1.0);
        let open = Interval::open(-1.0, 1.0);
        assert!(open.is_subset_of(&closed));
        assert!(!closed.is_subset_of(&open));
        assert!(closed.is_subset_of(&Interval::REAL_LINE));
        assert!(!Interval::REAL_LINE.is_subset_of(&closed));
    }

    #[test]
    fn graph_serde_tags() {
        let g: MonotoneGraph = serde_json::from_str(r#"{"kind":"indicator","lower":-1,"upper":1}"#).unwrap();
        assert_eq!(g, MonotoneGraph::obstacle(-1.0, 1.0));
        assert!(serde_json::from_str::<MonotoneGraph>(r#"{"kind":"logarithmic","scale":2}"#).is_err());
        let log: MonotoneGraph = serde_json::from_str(r#"{"kind":"logarithmic"}"#).unwrap();
        assert_eq!(log, MonotoneGraph::Logarithmic);
        assert_eq!(serde_json::to_string(&log).unwrap(), r#"{"kind":"logarithmic"}"#);
    }
}
