//! Command-line experiments: single runs, ε-studies, perturbation studies,
//! manufactured-solution convergence and potential checks.

pub mod config;
pub mod convergence;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{apply_override, parse_config, resolve_config, ParseError};

use crate::diagnostics::{self, DependenceReport, DiagnosticsError};
use crate::grid::{BulkField, StripGrid};
use crate::potential::{verify_coercivity, verify_compatibility, SampleGrid, DEFAULT_EPS_LEVELS};
use crate::solver::{
    eps_continuation, run_pool, AffineData, DataSource, RunConfig, RunOutput, Simulation, SolverError, StepData,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    EpsStudy,
    PerturbStudy,
    Convergence,
    CheckPotentials,
}

/// Parsed command line.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "chisel",
    version,
    about = "Cahn-Hilliard with dynamic boundary conditions: runs and studies"
)]
pub struct ExperimentSpec {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config; absent keys take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set grid.nx=32`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Save a snapshot every N steps (the last step is always saved).
    #[arg(long, default_value_t = 1)]
    pub save_every: usize,
    /// Concurrent runs in studies.
    #[arg(long, env = "CHISEL_WORKERS")]
    pub workers: Option<usize>,
    /// ε levels of `eps-study`, non-increasing (default: eps, eps/2, eps/4).
    #[arg(long, value_delimiter = ',')]
    pub eps_levels: Option<Vec<f64>>,
    /// Base amplitude δ of the `perturb-study` source perturbation δ cos(2πx/lx).
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

/// A failed experiment, reported as JSON on stderr.
#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Solver(SolverError),
    Diagnostics(DiagnosticsError),
    Io(std::io::Error),
    Check(Value),
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Validation(errs) => CliError::Config(errs.iter().map(|e| e.to_string()).collect()),
            other => CliError::Solver(other),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        CliError::Diagnostics(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Check(_) => EXIT_CONFIG,
            CliError::Solver(SolverError::NewtonDivergence { .. }) => EXIT_DIVERGENCE,
            CliError::Solver(SolverError::InvariantViolation { .. }) => EXIT_INVARIANT,
            CliError::Solver(SolverError::InvalidArgument(_)) => EXIT_CONFIG,
            CliError::Diagnostics(DiagnosticsError::ConfigMismatch(_) | DiagnosticsError::DomainKindMismatch(_)) => {
                EXIT_CONFIG
            }
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, detail) = match self {
            CliError::Config(msgs) => ("ConfigError", json!(msgs)),
            CliError::Solver(e) => (
                match e {
                    SolverError::NewtonDivergence { .. } => "NewtonDivergence",
                    SolverError::InvariantViolation { .. } => "InvariantViolation",
                    SolverError::InvalidArgument(_) => "ConfigError",
                    _ => "SolverError",
                },
                json!(e.to_string()),
            ),
            CliError::Diagnostics(e) => ("DiagnosticsError", json!(e.to_string())),
            CliError::Io(e) => ("IoError", json!(e.to_string())),
            CliError::Check(report) => ("CheckFailed", report.clone()),
        };
        json!({ "error": kind, "exit_code": self.exit_code(), "detail": detail })
    }
}

fn parse_errors(errs: Vec<ParseError>) -> CliError {
    CliError::Config(errs.iter().map(|e| e.to_string()).collect())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, extra: Value) -> Result<(), CliError> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "linear_algebra_threads": 1,
        "config": cfg,
        "extra": extra,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Writes `diagnostics.csv`, `snapshots/y_NNNNNN.bin` and the manifest of one run.
fn write_run(dir: &Path, command: &str, run: &RunOutput, extra: Value) -> Result<(), CliError> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
    diagnostics::write_csv(&mut csv, &run.diagnostics)?;
    csv.flush()?;
    for (n, state) in &run.snapshots {
        let mut f = BufWriter::new(File::create(dir.join("snapshots").join(format!("y_{n:06}.bin")))?);
        run.grid.write_binary(&mut f, &state.y, state.time)?;
        f.flush()?;
    }
    let extra = json!({ "dt": run.dt, "tau_eps": run.tau_eps, "save_every": run.save_every, "run": extra });
    write_manifest(dir, command, &run.config, extra)
}

/// Config data with `δ · cos(2πx/lx)` added to the bulk source.
#[derive(Debug)]
struct PerturbedSource {
    base: AffineData,
    extra: BulkField,
}

impl DataSource for PerturbedSource {
    fn at(&self, grid: &StripGrid, t: f64) -> StepData {
        let mut d = self.base.at(grid, t);
        d.g = d.g.add(&self.extra);
        d
    }
}

/// Runs `cfg` with the bulk source shifted by `delta · cos(2πx/lx)`.
pub fn perturbed_run(cfg: &RunConfig, delta: f64) -> Result<RunOutput, SolverError> {
    let grid = StripGrid::from_spec(&cfg.grid)?;
    let lx = grid.lx();
    let extra = grid.bulk_from_fn(|x, _| delta * (2.0 * std::f64::consts::PI * x / lx).cos());
    let data = Arc::new(PerturbedSource {
        base: AffineData::from_config(cfg, &grid),
        extra,
    });
    Simulation::with_data(cfg, data)?.run(1)
}

/// One perturbed run of a study: amplitude, trajectory and report against the base.
pub type PerturbedLevel = (f64, RunOutput, DependenceReport);

/// Base run plus runs perturbed at `delta · {1, 1/2, 1/4}`, with one
/// dependence report per level.
pub fn perturb_study(
    cfg: &RunConfig,
    delta: f64,
    workers: usize,
) -> Result<(RunOutput, Vec<PerturbedLevel>), CliError> {
    let levels = vec![0.0, delta, 0.5 * delta, 0.25 * delta];
    let mut runs = run_pool(workers, levels.clone(), |d| perturbed_run(cfg, d)).into_iter();
    let base = runs.next().expect("base run")?;
    let mut out = Vec::new();
    for (d, run) in levels[1..].iter().zip(runs) {
        let run = run?;
        let report = diagnostics::dependence_report(&base, &run)?;
        out.push((*d, run, report));
    }
    Ok((base, out))
}

fn cmd_run(spec: &ExperimentSpec, cfg: &RunConfig) -> Result<(), CliError> {
    let sim = Simulation::new(cfg)?;
    let run = sim.run(spec.save_every)?;
    let extra = match &sim.pair().bulk.graph {
        g @ crate::potential::MonotoneGraph::Logarithmic => json!({
            "separation": diagnostics::separation_report(&run, g)?,
            "notes": sim.validated().notes,
        }),
        _ => json!({ "notes": sim.validated().notes }),
    };
    write_run(&spec.out, "run", &run, extra)
}

fn cmd_eps_study(spec: &ExperimentSpec, cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let levels = spec
        .eps_levels
        .clone()
        .unwrap_or_else(|| vec![cfg.eps, cfg.eps / 2.0, cfg.eps / 4.0]);
    let study = eps_continuation(cfg, &levels, workers)?;
    for (k, run) in study.runs.iter().enumerate() {
        let dir = spec.out.join(format!("eps_{k}"));
        let trimmed = RunOutput {
            snapshots: run
                .snapshots
                .iter()
                .filter(|(n, _)| n % spec.save_every == 0 || *n == run.snapshots.len() - 1)
                .cloned()
                .collect(),
            ..run.clone()
        };
        write_run(&dir, "eps-study", &trimmed, json!({ "eps": levels[k] }))?;
    }
    write_json(&spec.out.join("distances.json"), &study.distances)?;
    write_manifest(&spec.out, "eps-study", cfg, json!({ "eps_levels": levels }))
}

fn cmd_perturb_study(spec: &ExperimentSpec, cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let (base, levels) = perturb_study(cfg, spec.delta, workers)?;
    write_run(&spec.out.join("base"), "perturb-study", &base, json!({ "delta": 0.0 }))?;
    let mut summary = Vec::new();
    for (k, (d, run, report)) in levels.iter().enumerate() {
        let dir = spec.out.join(format!("delta_{k}"));
        write_run(&dir, "perturb-study", run, json!({ "delta": d }))?;
        write_json(&dir.join("dependence.json"), report)?;
        summary.push(json!({ "delta": d, "report": report }));
    }
    write_json(&spec.out.join("dependence.json"), &summary)?;
    write_manifest(&spec.out, "perturb-study", cfg, json!({ "delta": spec.delta }))
}

fn cmd_convergence(spec: &ExperimentSpec, cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let dts = [4.0 * cfg.dt, 2.0 * cfg.dt, cfg.dt];
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    let grids = [(nx, ny), (2 * nx, 2 * (ny - 1) + 1), (4 * nx, 4 * (ny - 1) + 1)];
    let mut rows = convergence::temporal_study(cfg, &dts, workers)?;
    rows.extend(convergence::spatial_study(cfg, &grids, cfg.dt, workers)?);
    fs::create_dir_all(&spec.out)?;
    let mut w = csv::Writer::from_path(spec.out.join("convergence.csv")).map_err(DiagnosticsError::from)?;
    for r in &rows {
        w.serialize(r).map_err(DiagnosticsError::from)?;
    }
    w.flush()?;
    write_manifest(&spec.out, "convergence", cfg, json!({ "dts": dts, "grids": grids }))
}

/// Compatibility and coercivity reports of the configured pair, at the mean
/// of the configured initial datum.
pub fn check_potentials(cfg: &RunConfig) -> Result<Value, CliError> {
    let pair = cfg
        .potential
        .resolve()
        .map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let grid = StripGrid::from_spec(&cfg.grid).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let m0 = grid.mean_value(&cfg.y0.sample_bulk(&grid));
    let samples = SampleGrid::covering(&pair.boundary.graph.domain(), 801);
    let compatibility = verify_compatibility(&pair, &DEFAULT_EPS_LEVELS, &samples);
    let coercivity = verify_coercivity(&pair, m0, &DEFAULT_EPS_LEVELS, &samples);
    let pass = compatibility.is_ok() && coercivity.is_ok();
    let side = |r: Result<Value, String>| match r {
        Ok(v) => json!({ "pass": true, "report": v }),
        Err(e) => json!({ "pass": false, "error": e }),
    };
    Ok(json!({
        "pass": pass,
        "m0": m0,
        "eps_levels": DEFAULT_EPS_LEVELS,
        "compatibility": side(compatibility.map(|r| json!(r)).map_err(|e| e.to_string())),
        "coercivity": side(coercivity.map(|c| json!(c)).map_err(|e| e.to_string())),
    }))
}

fn cmd_check_potentials(spec: &ExperimentSpec, cfg: &RunConfig) -> Result<(), CliError> {
    let report = check_potentials(cfg)?;
    fs::create_dir_all(&spec.out)?;
    write_json(&spec.out.join("potentials.json"), &report)?;
    write_manifest(&spec.out, "check-potentials", cfg, Value::Null)?;
    if report["pass"] == json!(true) {
        Ok(())
    } else {
        Err(CliError::Check(report))
    }
}

/// Loads the config, runs the command and writes its artifacts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(), CliError> {
    if spec.save_every == 0 {
        return Err(CliError::Config(vec!["--save-every must be at least 1".into()]));
    }
    let text = fs::read_to_string(&spec.config)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", spec.config.display())]))?;
    let cfg = resolve_config(&text, &spec.overrides).map_err(parse_errors)?;
    let workers = spec.workers.unwrap_or_else(default_workers).max(1);
    fs::create_dir_all(&spec.out)?;
    match spec.command {
        Command::Run => cmd_run(spec, &cfg),
        Command::EpsStudy => cmd_eps_study(spec, &cfg, workers),
        Command::PerturbStudy => cmd_perturb_study(spec, &cfg, workers),
        Command::Convergence => cmd_convergence(spec, &cfg, workers),
        Command::CheckPotentials => cmd_check_potentials(spec, &cfg),
    }
}

/// Entry point of the `chisel` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match ExperimentSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_experiment(&spec) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
