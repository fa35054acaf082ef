//! Python bindings. Reports come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use orchestra_sim::experiment::{read_steady_input, SchedulerKind};
use orchestra_sim::mac::HoppingSequence;
use orchestra_sim::{ConfigError, NodeId, SimTime, SteadyCriterion, SteadyInput};

fn py_err(e: ConfigError) -> PyErr {
    match e {
        ConfigError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn criterion(window_s: u64, interval_ms: u64) -> SteadyCriterion {
    SteadyCriterion {
        window_ms: window_s * 1000,
        interval_ms,
    }
}

fn parse_scheduler(name: &str) -> PyResult<SchedulerKind> {
    name.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Physical channel for `(asn, channel_offset)`; `sequence` defaults to the
/// standard 16-channel hopping sequence.
#[pyfunction]
#[pyo3(signature = (asn, channel_offset, sequence=None))]
fn channel_for(asn: u64, channel_offset: u16, sequence: Option<Vec<u8>>) -> PyResult<u8> {
    let hop = match sequence {
        Some(v) => HoppingSequence::new(v).map_err(PyValueError::new_err)?,
        None => HoppingSequence::default(),
    };
    hop.channel_for(asn, channel_offset)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Orchestra's identity hash: the slot offset of `node` in a slotframe of `length`.
#[pyfunction]
fn slot_of(node: NodeId, length: u16) -> PyResult<u16> {
    if length == 0 {
        return Err(PyValueError::new_err("slotframe length must be at least 1"));
    }
    Ok(orchestra_sim::scheduling::slot_of(node, length))
}

#[pyclass(name = "Scenario", module = "orchestra_sim", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: orchestra_sim::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn reference() -> Self {
        PyScenario {
            inner: orchestra_sim::Scenario::reference(),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        orchestra_sim::Scenario::from_json(text)
            .map(|inner| PyScenario { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        orchestra_sim::Scenario::load(path)
            .map(|inner| PyScenario { inner })
            .map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn duration_ms(&self) -> u64 {
        self.inner.duration_ms
    }

    #[getter]
    fn node_ids(&self) -> Vec<NodeId> {
        self.inner.node_ids()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, nodes={}, duration_ms={})",
            self.inner.name,
            self.inner.nodes.len(),
            self.inner.duration_ms
        )
    }
}

/// Runs one scheduler and returns the report. With `out`, also writes the
/// trace files there.
#[pyfunction]
#[pyo3(signature = (scenario, scheduler, seed=None, window_s=60, interval_ms=65_536, out=None))]
fn run<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    scheduler: &str,
    seed: Option<u64>,
    window_s: u64,
    interval_ms: u64,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = parse_scheduler(scheduler)?;
    let seed = seed.unwrap_or(scenario.inner.seed);
    let crit = criterion(window_s, interval_ms);
    let sc = &scenario.inner;
    let result = py.detach(|| match &out {
        Some(dir) => orchestra_sim::run_to_dir(sc, kind, seed, crit, dir),
        None => orchestra_sim::run(sc, kind, seed, crit),
    });
    to_py(py, &result.map_err(py_err)?.report)
}

/// Runs both schedulers and returns the comparison, with each run's report
/// under `"reports"`.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None, window_s=60, interval_ms=65_536, out=None))]
fn compare<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: Option<u64>,
    window_s: u64,
    interval_ms: u64,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let seed = seed.unwrap_or(scenario.inner.seed);
    let crit = criterion(window_s, interval_ms);
    let sc = &scenario.inner;
    let result = py
        .detach(|| match &out {
            Some(dir) => orchestra_sim::compare_to_dir(sc, seed, crit, dir),
            None => orchestra_sim::compare(sc, seed, crit),
        })
        .map_err(py_err)?;
    let dict = to_py(py, &result.comparison)?;
    let reports: Vec<_> = result.runs.iter().map(|r| &r.report).collect();
    dict.set_item("reports", to_py(py, &reports)?)?;
    Ok(dict)
}

/// Earliest time (ms) at or after `from_ms` at which the steady-state
/// criterion holds, or None.
///
/// `trickle` rows are `(time_ms, node, interval_ms)`, `dio` rows
/// `(time_ms, node, trigger_index)`, `removals` rows `(time_ms, node)`.
#[pyfunction]
#[pyo3(signature = (nodes, trickle, dio, removals=Vec::new(), window_s=60, interval_ms=65_536, from_ms=0))]
fn detect_steady(
    nodes: Vec<NodeId>,
    mut trickle: Vec<(u64, NodeId, u64)>,
    mut dio: Vec<(u64, NodeId, u32)>,
    mut removals: Vec<(u64, NodeId)>,
    window_s: u64,
    interval_ms: u64,
    from_ms: u64,
) -> PyResult<Option<u64>> {
    if window_s == 0 || interval_ms == 0 {
        return Err(PyValueError::new_err(
            "window and interval must be positive",
        ));
    }
    trickle.sort();
    dio.sort();
    removals.sort();
    let input = SteadyInput {
        nodes: nodes.into_iter().collect(),
        trickle: trickle
            .into_iter()
            .map(|(t, n, i)| (SimTime(t), n, i))
            .collect(),
        dio: dio
            .into_iter()
            .map(|(t, n, i)| (SimTime(t), n, i))
            .collect(),
        removals: removals.into_iter().map(|(t, n)| (SimTime(t), n)).collect(),
    };
    Ok(
        orchestra_sim::detect_steady(&input, &criterion(window_s, interval_ms), SimTime(from_ms))
            .map(|t| t.0),
    )
}

/// `detect_steady` over a run directory written by `run` or `compare`.
#[pyfunction]
#[pyo3(signature = (path, window_s=60, interval_ms=65_536, from_ms=0))]
fn steady_from_dir(
    path: PathBuf,
    window_s: u64,
    interval_ms: u64,
    from_ms: u64,
) -> PyResult<Option<u64>> {
    let input = read_steady_input(&path).map_err(py_err)?;
    Ok(
        orchestra_sim::detect_steady(&input, &criterion(window_s, interval_ms), SimTime(from_ms))
            .map(|t| t.0),
    )
}

#[pymodule]
#[pyo3(name = "orchestra_sim")]
fn orchestra_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(channel_for, m)?)?;
    m.add_function(wrap_pyfunction!(slot_of, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(detect_steady, m)?)?;
    m.add_function(wrap_pyfunction!(steady_from_dir, m)?)?;
    m.add("SCHEDULERS", ["orchestra", "minimal"])?;
    Ok(())
}
