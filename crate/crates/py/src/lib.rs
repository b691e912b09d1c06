//! Python bindings for the simulator: topology construction, feasible-set
//! projection, schedule enumeration, experiment runs, and the verify suites.
//!
//! Build with `cargo build --release -p dogd-py`, then import the produced
//! cdylib as `dogd_py` (see python/smoke_test.py for the rename dance, or use
//! maturin).

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dogd_core::dogd::make_schedule;
use dogd_core::feasible::FeasibleSet;
use dogd_core::harness::{
    preset_names, preset_text, run_experiment, sweep, ExperimentConfig, ReferenceCache,
};
use dogd_core::suites::{run_suite, SUITE_NAMES};
use dogd_core::topology::{build_graph, metropolis_weights, mixing_report, GraphKind, GraphParams};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Connected undirected graph.
#[pyclass(name = "Graph")]
#[derive(Clone)]
struct PyGraph {
    inner: dogd_core::topology::Graph,
}

#[pymethods]
impl PyGraph {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(kind={}, n={}, edges={})",
            self.inner.kind,
            self.inner.n,
            self.inner.edge_count()
        )
    }
}

/// Doubly stochastic consensus matrix with spectral metadata.
#[pyclass(name = "ConsensusMatrix")]
#[derive(Clone)]
struct PyConsensusMatrix {
    inner: dogd_core::topology::ConsensusMatrix,
}

#[pymethods]
impl PyConsensusMatrix {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn lambda2(&self) -> f64 {
        self.inner.lambda2
    }

    #[getter]
    fn slem(&self) -> f64 {
        self.inner.slem
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n())
            .map(|i| self.inner.row(i).to_vec())
            .collect()
    }

    /// Numeric check of the total-variation mixing bound up to t_max.
    fn mixing_report(&self, t_max: usize) -> PyResult<HashMap<String, f64>> {
        let report = mixing_report(&self.inner, t_max).map_err(err)?;
        let mut out = HashMap::new();
        out.insert("pass".into(), report.all_pass() as u8 as f64);
        out.insert("max_l1".into(), report.max_l1());
        out.insert("lambda2_used".into(), report.lambda2_used);
        out.insert("cumulative_l1_max".into(), report.cumulative_l1_max);
        out.insert("cumulative_bound".into(), report.cumulative_bound);
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "ConsensusMatrix(n={}, lambda2={:.4}, slem={:.4})",
            self.inner.n(),
            self.inner.lambda2,
            self.inner.slem
        )
    }
}

/// Convex feasible set with exact Euclidean projection.
#[pyclass(name = "FeasibleSet")]
#[derive(Clone)]
struct PyFeasibleSet {
    inner: FeasibleSet,
}

#[pymethods]
impl PyFeasibleSet {
    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(PyFeasibleSet {
            inner: FeasibleSet::ball(center, radius).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(PyFeasibleSet {
            inner: FeasibleSet::boxed(lower, upper).map_err(err)?,
        })
    }

    #[staticmethod]
    fn unconstrained() -> Self {
        PyFeasibleSet {
            inner: FeasibleSet::Unconstrained,
        }
    }

    fn project(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&z).map_err(err)
    }

    #[pyo3(signature = (w, tol = 1e-12))]
    fn contains(&self, w: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&w, tol).map_err(err)
    }
}

#[pyfunction]
#[pyo3(name = "build_graph", signature = (kind, n, seed, radius = None, degree = None))]
fn py_build_graph(
    kind: &str,
    n: usize,
    seed: u64,
    radius: Option<f64>,
    degree: Option<usize>,
) -> PyResult<PyGraph> {
    let kind = match kind {
        "complete" => GraphKind::Complete,
        "cycle" => GraphKind::Cycle,
        "random_geometric" => GraphKind::RandomGeometric,
        "k_regular_expander" => GraphKind::KRegularExpander,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown graph kind {other:?}"
            )))
        }
    };
    let g = build_graph(kind, n, GraphParams { radius, degree }, seed).map_err(err)?;
    Ok(PyGraph { inner: g })
}

#[pyfunction]
#[pyo3(name = "metropolis_weights")]
fn py_metropolis_weights(graph: &PyGraph) -> PyResult<PyConsensusMatrix> {
    Ok(PyConsensusMatrix {
        inner: metropolis_weights(&graph.inner).map_err(err)?,
    })
}

/// Epoch-doubling schedule as a list of (steps, step_size) rounds.
#[pyfunction]
#[pyo3(name = "make_schedule", signature = (sigma, horizon, b = 2, c = 2))]
fn py_make_schedule(sigma: f64, horizon: usize, b: u32, c: u32) -> PyResult<Vec<(usize, f64)>> {
    let s = make_schedule(sigma, horizon, b, c).map_err(err)?;
    Ok(s.rounds.iter().map(|r| (r.steps, r.step_size)).collect())
}

fn summarize(result: &dogd_core::harness::ExperimentResult, py: Python<'_>) -> PyResult<PyObject> {
    let dict = pyo3::types::PyDict::new_bound(py);
    dict.set_item("n", result.graph.n)?;
    dict.set_item("slem", result.matrix.slem)?;
    dict.set_item("lambda2", result.matrix.lambda2)?;
    dict.set_item("f_star", result.reference.f_star)?;
    let runs = pyo3::types::PyDict::new_bound(py);
    for run in &result.runs {
        let entry = pyo3::types::PyDict::new_bound(py);
        entry.set_item("final_worst_gap", run.final_worst_gap())?;
        entry.set_item(
            "gap_series",
            run.gaps
                .points
                .iter()
                .map(|p| (p.steps, p.worst_gap))
                .collect::<Vec<_>>(),
        )?;
        entry.set_item(
            "regret_per_step",
            run.regret.as_ref().map(|r| r.per_step_avg),
        )?;
        entry.set_item("slope", run.slope.map(|s| s.slope))?;
        entry.set_item("max_consensus_residual", run.trace.max_consensus_residual())?;
        runs.set_item(run.algorithm.name(), entry)?;
    }
    dict.set_item("runs", runs)?;
    Ok(dict.into())
}

/// Run an experiment from config text; returns a summary dict.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir = None))]
fn run_config(py: Python<'_>, config_text: &str, out_dir: Option<String>) -> PyResult<PyObject> {
    let mut cfg = ExperimentConfig::parse(config_text).map_err(err)?;
    if let Some(dir) = out_dir {
        cfg.output_dir = Some(PathBuf::from(dir));
    }
    if cfg.sweep.is_some() {
        return Err(PyValueError::new_err(
            "config defines a sweep; use run_preset or drop the sweep keys",
        ));
    }
    let mut cache = ReferenceCache::new(cfg.output_dir.as_ref().map(|d| d.join("refcache")));
    let result = run_experiment(&cfg, config_text, &mut cache).map_err(err)?;
    summarize(&result, py)
}

/// Run a built-in preset; returns a summary dict (or, for sweep-style
/// presets, a list of (value, seed, final_worst_gap) rows).
#[pyfunction]
#[pyo3(signature = (name, out_dir = None))]
fn run_preset(py: Python<'_>, name: &str, out_dir: Option<String>) -> PyResult<PyObject> {
    let text = preset_text(name).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown preset {name:?}; known: {}",
            preset_names().join(", ")
        ))
    })?;
    let mut cfg = ExperimentConfig::parse(text).map_err(err)?;
    if let Some(dir) = out_dir {
        cfg.output_dir = Some(PathBuf::from(dir));
    }
    let mut cache = ReferenceCache::new(cfg.output_dir.as_ref().map(|d| d.join("refcache")));
    if let Some(spec) = cfg.sweep.clone() {
        let (cells, csv) = sweep(&cfg, &spec, &mut cache).map_err(err)?;
        if let Some(dir) = &cfg.output_dir {
            std::fs::create_dir_all(dir).map_err(err)?;
            std::fs::write(dir.join("sweep.csv"), &csv).map_err(err)?;
        }
        let rows: Vec<(String, u64, Option<f64>)> = cells
            .iter()
            .map(|c| {
                let gap = c
                    .outcome
                    .as_ref()
                    .ok()
                    .and_then(|gaps| gaps.first().map(|(_, g)| *g));
                (c.value.clone(), c.seed, gap)
            })
            .collect();
        return Ok(rows.into_py(py));
    }
    let result = run_experiment(&cfg, text, &mut cache).map_err(err)?;
    summarize(&result, py)
}

/// Run a named invariant suite; returns (all_pass, [(name, pass, detail)]).
#[pyfunction]
#[pyo3(signature = (name, seed = 42))]
fn verify_suite(name: &str, seed: u64) -> PyResult<(bool, Vec<(String, bool, String)>)> {
    let checks = run_suite(name, seed).map_err(err)?;
    let all = checks.iter().all(|c| c.pass);
    Ok((
        all,
        checks
            .into_iter()
            .map(|c| (c.name, c.pass, c.detail))
            .collect(),
    ))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    preset_names().to_vec()
}

#[pyfunction]
fn suites() -> Vec<&'static str> {
    SUITE_NAMES.to_vec()
}

#[pymodule]
fn dogd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyConsensusMatrix>()?;
    m.add_class::<PyFeasibleSet>()?;
    m.add_function(wrap_pyfunction!(py_build_graph, m)?)?;
    m.add_function(wrap_pyfunction!(py_metropolis_weights, m)?)?;
    m.add_function(wrap_pyfunction!(py_make_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    Ok(())
}
