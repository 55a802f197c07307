//! Python bindings: potentials, the strip grid, config parsing and runs.
//!
//! Fields cross the boundary as flat lists in row-major node order
//! (`n = j·nx + i`); reports and diagnostics as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

use chisel::cli::config::{parse_config as parse_run_config, resolve_config};
use chisel::grid::{BoundaryField, BulkField, StripGrid};
use chisel::potential::{MonotoneGraph, PotentialPair, PotentialPreset};
use chisel::solver::{self, RunConfig, SolverError};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_error(e: SolverError) -> PyErr {
    match e {
        SolverError::Validation(_) | SolverError::InvalidArgument(_) | SolverError::Grid(_) => value_error(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn config_from(text: &str, overrides: Vec<String>) -> PyResult<RunConfig> {
    resolve_config(text, &overrides)
        .map_err(|errs| value_error(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))
}

/// Maximal monotone graph: polynomial, logarithmic or indicator.
#[pyclass(name = "Graph", module = "chisel_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(MonotoneGraph);

#[pymethods]
impl PyGraph {
    /// `β(r) = Σ_k a_k r^(2k+1)` with nonnegative coefficients.
    #[staticmethod]
    fn polynomial(coefficients: Vec<f64>) -> PyResult<Self> {
        let g = MonotoneGraph::Polynomial { coefficients };
        g.validate().map_err(value_error)?;
        Ok(PyGraph(g))
    }

    #[staticmethod]
    fn cubic() -> Self {
        PyGraph(MonotoneGraph::cubic())
    }

    #[staticmethod]
    fn logarithmic() -> Self {
        PyGraph(MonotoneGraph::Logarithmic)
    }

    #[staticmethod]
    fn indicator(lower: f64, upper: f64) -> PyResult<Self> {
        let g = MonotoneGraph::obstacle(lower, upper);
        g.validate().map_err(value_error)?;
        Ok(PyGraph(g))
    }

    /// `(lower, upper)` of the domain.
    fn domain(&self) -> (f64, f64) {
        let d = self.0.domain();
        (d.lower, d.upper)
    }

    fn primitive(&self, r: f64) -> f64 {
        self.0.primitive(r)
    }

    fn minimal_section(&self, r: f64) -> PyResult<f64> {
        self.0.minimal_section(r).map_err(value_error)
    }

    fn resolvent(&self, eps: f64, r: f64) -> f64 {
        self.0.resolvent(eps, r)
    }

    fn yosida(&self, eps: f64, r: f64) -> f64 {
        self.0.yosida(eps, r)
    }

    fn yosida_slope(&self, eps: f64, r: f64) -> f64 {
        self.0.yosida_slope(eps, r)
    }

    fn yosida_primitive(&self, eps: f64, r: f64) -> f64 {
        self.0.yosida_primitive(eps, r)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("graphs serialize")
    }

    fn __repr__(&self) -> String {
        format!("Graph({})", self.to_json())
    }
}

/// Bulk and boundary potentials with their compatibility constants.
#[pyclass(name = "PotentialPair", module = "chisel_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotentialPair(PotentialPair);

#[pymethods]
impl PyPotentialPair {
    /// Named preset: `regular`, `logarithmic`, `double-obstacle`,
    /// `obstacle-log` or `log-obstacle`.
    #[staticmethod]
    #[pyo3(signature = (name, c = 1.0))]
    fn preset(name: &str, c: f64) -> PyResult<Self> {
        let p: PotentialPreset = serde_json::from_value(Value::String(name.into())).map_err(value_error)?;
        Ok(PyPotentialPair(PotentialPair::preset(p, c)))
    }

    #[getter]
    fn bulk_graph(&self) -> PyGraph {
        PyGraph(self.0.bulk.graph.clone())
    }

    #[getter]
    fn boundary_graph(&self) -> PyGraph {
        PyGraph(self.0.boundary.graph.clone())
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    #[getter]
    fn c_compat(&self) -> f64 {
        self.0.c_compat
    }

    fn bulk_yosida(&self, eps: f64, r: f64) -> f64 {
        self.0.bulk_yosida(eps, r)
    }

    fn boundary_yosida(&self, eps: f64, r: f64) -> f64 {
        self.0.boundary_yosida(eps, r)
    }

    fn bulk_perturbation(&self, r: f64) -> f64 {
        self.0.bulk.perturbation.value(r)
    }

    fn boundary_perturbation(&self, r: f64) -> f64 {
        self.0.boundary.perturbation.value(r)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("pairs serialize")
    }
}

/// Periodic strip `[0, lx) × [0, ly]` with lumped measures.
#[pyclass(name = "Grid", module = "chisel_py", frozen)]
struct PyGrid(StripGrid);

impl PyGrid {
    fn bulk(&self, values: Vec<f64>) -> PyResult<BulkField> {
        let f = BulkField(values);
        self.0.check_bulk(&f).map_err(value_error)?;
        Ok(f)
    }

    fn boundary(&self, values: Vec<f64>) -> PyResult<BoundaryField> {
        let b = BoundaryField(values);
        self.0.check_boundary(&b).map_err(value_error)?;
        Ok(b)
    }
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny, lx = 1.0, ly = 0.5))]
    fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> PyResult<Self> {
        StripGrid::new(nx, ny, lx, ly).map(PyGrid).map_err(value_error)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx()
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny()
    }

    #[getter]
    fn hx(&self) -> f64 {
        self.0.hx()
    }

    #[getter]
    fn hy(&self) -> f64 {
        self.0.hy()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    #[getter]
    fn boundary_count(&self) -> usize {
        self.0.boundary_count()
    }

    /// Node coordinates as `(xs, ys)`.
    fn coordinates(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.0;
        (0..g.node_count()).map(|n| (g.x(n % g.nx()), g.y(n / g.nx()))).unzip()
    }

    fn bulk_measure(&self) -> Vec<f64> {
        self.0.bulk_measure().to_vec()
    }

    fn laplacian(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.bulk_laplacian(&self.bulk(f)?).0)
    }

    fn laplace_beltrami(&self, b: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.laplace_beltrami(&self.boundary(b)?).0)
    }

    fn trace(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.trace(&self.bulk(f)?).0)
    }

    fn normal_derivative(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.normal_derivative(&self.bulk(f)?).0)
    }

    fn mean_value(&self, f: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.mean_value(&self.bulk(f)?))
    }

    fn inner(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.inner(&self.bulk(f)?, &self.bulk(g)?))
    }

    fn l2_norm(&self, f: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.l2_norm(&self.bulk(f)?))
    }

    fn v_norm(&self, f: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.v_norm(&self.bulk(f)?))
    }

    /// Zero-mean solution of `−Δ_h u = v − mean(v)`.
    fn neumann_solve(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.neumann_solve(&self.bulk(v)?).map_err(value_error)?.0)
    }

    fn dual_norm(&self, v: Vec<f64>) -> PyResult<f64> {
        self.0.dual_norm(&self.bulk(v)?).map_err(value_error)
    }
}

/// A validated run configuration ready to integrate.
#[pyclass(name = "Simulation", module = "chisel_py", frozen)]
struct PySimulation(solver::Simulation);

#[pymethods]
impl PySimulation {
    /// Builds from JSON config text with optional `key=value` overrides.
    #[new]
    #[pyo3(signature = (config = "{}", overrides = Vec::new()))]
    fn new(config: &str, overrides: Vec<String>) -> PyResult<Self> {
        let cfg = config_from(config, overrides)?;
        solver::Simulation::new(&cfg).map(PySimulation).map_err(solver_error)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn tau_eps(&self) -> f64 {
        self.0.tau_eps()
    }

    #[getter]
    fn m0(&self) -> f64 {
        self.0.m0()
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.0.validated().notes.clone()
    }

    fn config_json(&self) -> String {
        serde_json::to_string_pretty(self.0.config()).expect("configs serialize")
    }

    fn initial_y(&self) -> Vec<f64> {
        self.0.initial_state().y.0
    }

    /// Integrates to `t_final`. Returns `{"diagnostics": [...], "snapshots":
    /// [{"step", "time", "y", "w"}, ...]}`.
    #[pyo3(signature = (save_every = 1))]
    fn run<'py>(&self, py: Python<'py>, save_every: usize) -> PyResult<Bound<'py, PyAny>> {
        if save_every == 0 {
            return Err(value_error("save_every must be at least 1"));
        }
        let sim = &self.0;
        let out = py.detach(|| sim.run(save_every)).map_err(solver_error)?;
        let snapshots: Vec<Value> = out
            .snapshots
            .iter()
            .map(|(n, s)| serde_json::json!({ "step": n, "time": s.time, "y": s.y.0, "w": s.w.0 }))
            .collect();
        let value = serde_json::json!({ "diagnostics": out.diagnostics, "snapshots": snapshots });
        to_py(py, &value)
    }
}

/// `τ_ε = τ` if `τ > 0`, else `ε`.
#[pyfunction]
fn tau_eps(tau: f64, eps: f64) -> f64 {
    solver::tau_eps(tau, eps)
}

/// Parses and range-checks JSON config text; returns the resolved config
/// with defaults filled in.
#[pyfunction]
#[pyo3(signature = (text, overrides = Vec::new()))]
fn parse_config<'py>(py: Python<'py>, text: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = if overrides.is_empty() {
        parse_run_config(text)
            .map_err(|errs| value_error(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))?
    } else {
        config_from(text, overrides)?
    };
    to_py(py, &serde_json::to_value(&cfg).expect("configs serialize"))
}

/// Sampled compatibility and coercivity checks of the configured pair.
#[pyfunction]
#[pyo3(signature = (config = "{}"))]
fn check_potentials<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config, Vec::new())?;
    let report = chisel::cli::check_potentials(&cfg).map_err(|e| value_error(e.to_json()))?;
    to_py(py, &report)
}

#[pymodule]
fn chisel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPotentialPair>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(tau_eps, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(check_potentials, m)?)?;
    Ok(())
}
