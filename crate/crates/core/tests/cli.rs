//! End-to-end runs of the `chisel` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "grid": {"nx": 12, "ny": 7, "lx": 1.0, "ly": 0.5},
  "dt": 0.002,
  "t_final": 0.01
}"#;

fn chisel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chisel"))
        .args(args)
        .current_dir(dir)
        .env_remove("CHISEL_WORKERS")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_diagnostics_snapshots_and_manifest() {
    let (dir, cfg) = setup(SMALL);
    let out = chisel(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "out",
            "--save-every",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    let csv = fs::read_to_string(root.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("step,time,mass,energy"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let mut snaps: Vec<String> = fs::read_dir(root.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    snaps.sort();
    assert_eq!(snaps, ["y_000000.bin", "y_000002.bin", "y_000004.bin", "y_000005.bin"]);
    let bytes = fs::read(root.join("snapshots/y_000005.bin")).unwrap();
    let (spec, time, field) = chisel::grid::read_binary(&bytes).unwrap();
    assert_eq!((spec.nx, spec.ny), (12, 7));
    assert_eq!(time, 0.01);
    assert_eq!(field.len(), 84);
    let manifest = read_json(&root.join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["linear_algebra_threads"], 1);
    assert_eq!(manifest["config"]["grid"]["nx"], 12);
    assert_eq!(manifest["config"]["eps"], 0.1);
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, cfg) = setup(SMALL);
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        assert!(chisel(&["run", "--config", cfg, "--out", out], dir.path())
            .status
            .success());
    }
    for file in ["diagnostics.csv", "manifest.json", "snapshots/y_000005.bin"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn out_of_range_eps_exits_with_config_error() {
    let (dir, cfg) = setup(r#"{"eps": 1.5}"#);
    let out = chisel(&["run", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 2);
    assert!(err.to_string().contains("eps"), "{err}");
}

#[test]
fn unknown_key_is_reported_with_its_name() {
    let (dir, cfg) = setup("{\n  \"epsilonn\": 0.1\n}");
    let out = chisel(&["run", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out).to_string().contains("epsilonn"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = chisel(&["run", "--config", "nope.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_reach_the_manifest() {
    let (dir, cfg) = setup(SMALL);
    let out = chisel(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "out",
            "--set",
            "eps=0.05",
            "--set",
            "potential.preset=double-obstacle",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["config"]["eps"], 0.05);
    assert_eq!(manifest["config"]["potential"]["preset"], "double-obstacle");

    let out = chisel(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "bad",
            "--set",
            "grid.nz=3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out).to_string().contains("grid.nz"));
}

#[test]
fn newton_failure_exits_with_divergence_code() {
    let (dir, cfg) = setup(SMALL);
    let out = chisel(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "out",
            "--set",
            "newton.max_iter=1",
            "--set",
            "newton.tol=1e-300",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["exit_code"], 3);
}

#[test]
fn check_potentials_accepts_double_obstacle_and_rejects_log_obstacle() {
    let (dir, cfg) = setup(r#"{"potential": {"preset": "double-obstacle"}}"#);
    let out = chisel(
        &["check-potentials", "--config", cfg.to_str().unwrap(), "--out", "out"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("out/potentials.json"))["pass"], true);

    let (dir, cfg) = setup(r#"{"potential": {"preset": "log-obstacle"}}"#);
    let out = chisel(
        &["check-potentials", "--config", cfg.to_str().unwrap(), "--out", "out"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let report = read_json(&dir.path().join("out/potentials.json"));
    assert_eq!(report["pass"], false);
    assert_eq!(report["compatibility"]["pass"], false);
}

#[test]
fn perturb_study_with_zero_delta_has_zero_lhs() {
    let (dir, cfg) = setup(SMALL);
    let out = chisel(
        &[
            "perturb-study",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "out",
            "--delta",
            "0",
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("out/dependence.json"));
    let levels = summary.as_array().unwrap();
    assert_eq!(levels.len(), 3);
    for level in levels {
        assert_eq!(level["report"]["lhs"], 0.0);
    }
    assert!(dir.path().join("out/base/diagnostics.csv").exists());
}

#[test]
fn eps_study_writes_one_run_per_level_and_distances() {
    let (dir, cfg) = setup(SMALL);
    let out = chisel(
        &[
            "eps-study",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "out",
            "--eps-levels",
            "0.2,0.1,0.05",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        assert!(dir.path().join(format!("out/eps_{k}/diagnostics.csv")).exists());
    }
    let distances = read_json(&dir.path().join("out/distances.json"));
    assert_eq!(distances.as_array().unwrap().len(), 2);
}

#[test]
fn workers_fall_back_to_environment() {
    let (dir, cfg) = setup(SMALL);
    let cfg = cfg.to_str().unwrap();
    let args = ["perturb-study", "--config", cfg, "--out", "env", "--delta", "0.1"];
    let out = Command::new(env!("CARGO_BIN_EXE_chisel"))
        .args(args)
        .current_dir(dir.path())
        .env("CHISEL_WORKERS", "3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = chisel(
        &[
            "perturb-study",
            "--config",
            cfg,
            "--out",
            "flag",
            "--delta",
            "0.1",
            "--workers",
            "1",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let a = fs::read(dir.path().join("env/dependence.json")).unwrap();
    let b = fs::read(dir.path().join("flag/dependence.json")).unwrap();
    assert_eq!(a, b);

    let out = Command::new(env!("CARGO_BIN_EXE_chisel"))
        .args(["run", "--config", cfg, "--out", "bad"])
        .current_dir(dir.path())
        .env("CHISEL_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_writes_a_table() {
    let (dir, cfg) = setup(r#"{"grid": {"nx": 8, "ny": 5, "lx": 1.0, "ly": 0.5}, "dt": 0.01, "t_final": 0.04}"#);
    let out = chisel(
        &["convergence", "--config", cfg.to_str().unwrap(), "--out", "out"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("out/convergence.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "study");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| &r[0] == "time").count(), 3);
}
