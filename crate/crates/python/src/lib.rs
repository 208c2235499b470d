use hornlbp::ranking::{self, AlarmSet};
use hornlbp::schedule::{self, parse_strategy};
use hornlbp::synth::SynthSpec;
use hornlbp::{EngineOptions, Factor, FactorKind, Strategy, VariableId};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: hornlbp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A builtin name, or the text of a strategy file.
fn strategy_arg(s: &str) -> PyResult<Strategy> {
    if let Some(st) = Strategy::from_name(s.trim()) {
        return Ok(st);
    }
    parse_strategy(s).map_err(err)
}

fn variable(v: u32) -> VariableId {
    VariableId(v)
}

#[pyclass(name = "FactorGraph", module = "pyhornlbp", frozen)]
struct PyFactorGraph {
    inner: hornlbp::FactorGraph,
}

#[pymethods]
impl PyFactorGraph {
    /// `factors` holds `(kind, head, body, p1, p2)` tuples, kind "AND" or "OR".
    #[new]
    fn new(num_variables: usize, factors: Vec<(String, u32, Vec<u32>, f64, f64)>) -> PyResult<Self> {
        let factors = factors
            .into_iter()
            .map(|(kind, head, body, p1, p2)| {
                let body = body.into_iter().map(variable).collect();
                match kind.to_ascii_uppercase().as_str() {
                    "AND" => Ok(Factor::and(variable(head), body, p1, p2)),
                    "OR" => Ok(Factor::or(variable(head), body, p1, p2)),
                    other => Err(PyValueError::new_err(format!("unknown factor kind {other:?}"))),
                }
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = hornlbp::FactorGraph::new(num_variables, factors).map_err(err)?;
        Ok(PyFactorGraph { inner })
    }

    #[staticmethod]
    fn from_fastfg(text: &str) -> PyResult<Self> {
        let inner = hornlbp::graph::parse_factor_graph(text).map_err(err)?;
        Ok(PyFactorGraph { inner })
    }

    #[staticmethod]
    fn from_dag(text: &str) -> PyResult<Self> {
        let dag = hornlbp::graph::BayesianDag::parse(text).map_err(err)?;
        let inner = hornlbp::graph::from_bayesian_dag(&dag).map_err(err)?;
        Ok(PyFactorGraph { inner })
    }

    fn to_fastfg(&self) -> String {
        self.inner.to_fastfg()
    }

    #[getter]
    fn num_variables(&self) -> usize {
        self.inner.num_variables()
    }

    #[getter]
    fn num_factors(&self) -> usize {
        self.inner.num_factors()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn factors(&self) -> Vec<(&'static str, u32, Vec<u32>, f64, f64)> {
        self.inner
            .factors()
            .iter()
            .map(|f| {
                let kind = match f.kind {
                    FactorKind::And => "AND",
                    FactorKind::Or => "OR",
                };
                (kind, f.head.0, f.body.iter().map(|v| v.0).collect(), f.p1, f.p2)
            })
            .collect()
    }

    /// Copy with `variable` pinned to `observed`.
    fn clamp(&self, variable: u32, observed: bool) -> PyResult<Self> {
        let inner = self.inner.clamp_evidence(VariableId(variable), observed).map_err(err)?;
        Ok(PyFactorGraph { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "FactorGraph(variables={}, factors={}, edges={})",
            self.inner.num_variables(),
            self.inner.num_factors(),
            self.inner.num_edges()
        )
    }
}

#[pyclass(name = "InferenceResult", module = "pyhornlbp", frozen, get_all)]
struct PyInferenceResult {
    /// `P(v = 1)` per variable.
    p1: Vec<f64>,
    p0: Vec<f64>,
    converged: bool,
    iterations: usize,
    last_delta: f64,
    deltas: Vec<f64>,
    message_updates: u64,
    elapsed_seconds: f64,
}

#[pymethods]
impl PyInferenceResult {
    fn __repr__(&self) -> String {
        format!(
            "InferenceResult(converged={}, iterations={}, last_delta={:e})",
            self.converged, self.iterations, self.last_delta
        )
    }
}

#[pyfunction]
#[pyo3(signature = (graph, strategy = "PARALL", max_iterations = 1000, tolerance = 1e-9, normalize = true, workers = 0))]
fn infer(
    py: Python<'_>,
    graph: &PyFactorGraph,
    strategy: &str,
    max_iterations: usize,
    tolerance: f64,
    normalize: bool,
    workers: usize,
) -> PyResult<PyInferenceResult> {
    let strategy = strategy_arg(strategy)?;
    let options = EngineOptions {
        max_iterations,
        tolerance,
        normalize_messages: normalize,
        workers,
        ..EngineOptions::default()
    };
    let g = &graph.inner;
    let r = py.detach(|| hornlbp::infer(g, &strategy, &options)).map_err(err)?;
    Ok(PyInferenceResult {
        p1: r.marginals.iter().map(|m| m.p1).collect(),
        p0: r.marginals.iter().map(|m| m.p0).collect(),
        converged: r.converged,
        iterations: r.iterations,
        last_delta: r.last_delta,
        deltas: r.deltas,
        message_updates: r.message_updates,
        elapsed_seconds: r.elapsed.as_secs_f64(),
    })
}

/// Factor-to-variable batches as lists of `(factor, slot)`.
#[pyfunction]
#[pyo3(signature = (graph, strategy = "PARALL"))]
fn schedule_batches(graph: &PyFactorGraph, strategy: &str) -> PyResult<Vec<Vec<(usize, usize)>>> {
    let (_, s) = schedule::compile(&graph.inner, &strategy_arg(strategy)?).map_err(err)?;
    Ok(s.factor_to_var
        .iter()
        .map(|b| b.iter().map(|e| (e.factor as usize, e.slot as usize)).collect())
        .collect())
}

/// `P(v = 1)` by enumeration.
#[pyfunction]
fn exact_marginals(graph: &PyFactorGraph) -> PyResult<Vec<f64>> {
    let m = hornlbp::oracle::exact_marginals(&graph.inner).map_err(err)?;
    Ok(m.iter().map(|m| m.p1).collect())
}

#[pyfunction]
fn compute_metrics<'py>(py: Python<'py>, labels: Vec<bool>) -> PyResult<Bound<'py, PyDict>> {
    let m = ranking::compute_metrics(&labels);
    let d = PyDict::new(py);
    d.set_item("rank100t", m.rank100t)?;
    d.set_item("rank90t", m.rank90t)?;
    d.set_item("inversions", m.inversions)?;
    d.set_item("auc", m.auc)?;
    d.set_item("num_true", m.num_true)?;
    d.set_item("num_false", m.num_false)?;
    Ok(d)
}

/// Returns the graph and its alarms as `(variable, label)` pairs.
#[pyfunction]
#[pyo3(signature = (tuples, clauses, seed = 0, tree = false, num_alarms = None))]
fn synth(
    tuples: usize,
    clauses: usize,
    seed: u64,
    tree: bool,
    num_alarms: Option<usize>,
) -> PyResult<(PyFactorGraph, Vec<(u32, bool)>)> {
    let mut spec = SynthSpec::new(tuples, clauses).seed(seed);
    spec.tree_only = tree;
    if let Some(n) = num_alarms {
        spec.num_alarms = n;
    }
    let (g, alarms) = hornlbp::synth::generate(&spec).map_err(err)?;
    let pairs = alarms
        .alarms()
        .iter()
        .zip(alarms.labels())
        .map(|(a, l)| (a.0, *l))
        .collect();
    Ok((PyFactorGraph { inner: g }, pairs))
}

/// Simulated interactive ranking; returns the inspection order as
/// `(alarm, label, p_true)` rows.
#[pyfunction]
#[pyo3(signature = (graph, alarms, strategy = "PARALL", max_iterations = 1000, tolerance = 1e-9))]
fn rank(
    py: Python<'_>,
    graph: &PyFactorGraph,
    alarms: Vec<(u32, bool)>,
    strategy: &str,
    max_iterations: usize,
    tolerance: f64,
) -> PyResult<Vec<(u32, bool, f64)>> {
    let (vars, labels) = alarms.into_iter().map(|(v, l)| (VariableId(v), l)).unzip();
    let set = AlarmSet::new(vars, labels).map_err(err)?;
    let strategy = strategy_arg(strategy)?;
    let options = EngineOptions {
        max_iterations,
        tolerance,
        ..EngineOptions::default()
    };
    let g = &graph.inner;
    let trace = py
        .detach(|| ranking::interaction_loop(g, &set, &strategy, &options))
        .map_err(err)?;
    Ok(trace.rounds.iter().map(|r| (r.alarm.0, r.label, r.p_true)).collect())
}

#[pymodule]
fn pyhornlbp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFactorGraph>()?;
    m.add_class::<PyInferenceResult>()?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_batches, m)?)?;
    m.add_function(wrap_pyfunction!(exact_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    Ok(())
}
