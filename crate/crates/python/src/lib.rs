//! Python bindings: load or generate instances, decide feasibility, build
//! and audit schedules.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use chainsched::coloring::find;
use chainsched::feasibility::{self, Feasibility};
use chainsched::gen::{self, GenSpec, IntervalModel, PeriodMix};
use chainsched::model::{
    self as core_model, Direction, InstanceFile, Normalized, PeriodPolicy, RawStream, Topology,
};
use chainsched::oracle::{self, OracleOutcome};
use chainsched::schedule::{self as core_schedule, GanttFormat, ScheduleDocument};
use chainsched::validator;

create_exception!(pychainsched, ChainschedError, PyException);

fn err(e: chainsched::Error) -> PyErr {
    ChainschedError::new_err(e.to_string())
}

fn direction(name: &str) -> PyResult<Direction> {
    match name {
        "ltr" => Ok(Direction::LeftToRight),
        "rtl" => Ok(Direction::RightToLeft),
        other => Err(PyValueError::new_err(format!(
            "direction must be 'ltr' or 'rtl', not {other:?}"
        ))),
    }
}

fn policy(name: &str) -> PyResult<PeriodPolicy> {
    match name {
        "reject" => Ok(PeriodPolicy::Reject),
        "round_down" => Ok(PeriodPolicy::RoundDown),
        "round_nearest" => Ok(PeriodPolicy::RoundNearest),
        other => Err(PyValueError::new_err(format!(
            "unknown period policy {other:?}"
        ))),
    }
}

/// Hands JSON text to Python's `json.loads`.
fn to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Streams of both directions on one chain.
#[pyclass(name = "Instance", module = "pychainsched", frozen)]
struct PyInstance {
    inner: Normalized,
}

#[pymethods]
impl PyInstance {
    /// Parses the JSON instance format.
    #[staticmethod]
    #[pyo3(signature = (text, period_policy = "round_down"))]
    fn from_json(text: &str, period_policy: &str) -> PyResult<Self> {
        let file = InstanceFile::from_json(text).map_err(err)?;
        Ok(Self {
            inner: file.normalize(policy(period_policy)?).map_err(err)?,
        })
    }

    /// Builds an instance from `(id, src_switch, dst_switch, period)` tuples.
    #[staticmethod]
    #[pyo3(signature = (switches, streams, period_policy = "round_down"))]
    fn from_streams(
        switches: u32,
        streams: Vec<(String, u32, u32, u64)>,
        period_policy: &str,
    ) -> PyResult<Self> {
        let raw: Vec<RawStream> = streams
            .into_iter()
            .map(|(id, s, d, p)| RawStream::new(id, s, d, p))
            .collect();
        let topology = Topology::new(switches).map_err(err)?;
        Ok(Self {
            inner: core_model::normalize(topology, &raw, policy(period_policy)?).map_err(err)?,
        })
    }

    #[getter]
    fn switches(&self) -> u32 {
        self.inner.topology().switches()
    }

    /// Hyperperiod of one direction.
    fn hyperperiod(&self, direction: &str) -> PyResult<u64> {
        Ok(self.inner.get(self::direction(direction)?).hyperperiod())
    }

    /// Stream ids of one direction, in input order.
    fn stream_ids(&self, direction: &str) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .get(self::direction(direction)?)
            .streams()
            .iter()
            .map(|s| s.id.clone())
            .collect())
    }

    /// Weighted loads of every normalized link at `level`.
    fn load_profile(&self, direction: &str, level: u32) -> PyResult<Vec<u64>> {
        let profile = feasibility::load_profile(self.inner.get(self::direction(direction)?), level)
            .map_err(err)?;
        Ok(profile.loads().to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.directions().iter().map(|i| i.len()).sum()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(switches={}, streams={})",
            self.switches(),
            self.__len__()
        )
    }
}

/// Injection times for both directions.
#[pyclass(name = "Schedule", module = "pychainsched", frozen)]
struct PySchedule {
    doc: ScheduleDocument,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn from_json(text: &str, switches: u32) -> PyResult<Self> {
        Ok(Self {
            doc: ScheduleDocument::from_json(text, switches).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.doc).map_err(|e| err(e.into()))
    }

    /// `(stream, replication, injection_time)` for one direction.
    fn entries(&self, direction: &str) -> PyResult<Vec<(String, u64, u64)>> {
        let d = self::direction(direction)?;
        Ok(self
            .doc
            .get(d)
            .map(|s| {
                s.entries
                    .iter()
                    .map(|e| (e.stream.clone(), e.replication, e.injection_time))
                    .collect()
            })
            .unwrap_or_default())
    }

    /// Gate control list table as a dict.
    fn gcl(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &core_schedule::emit_gcl(&self.doc).map_err(err)?)
    }

    #[pyo3(signature = (instance, format = "text"))]
    fn gantt(&self, instance: &PyInstance, format: &str) -> PyResult<String> {
        let format: GanttFormat = format.parse().map_err(err)?;
        Ok(core_schedule::render_document(
            &self.doc,
            &instance.inner,
            format,
        ))
    }
}

/// Verdict dict: `{"verdict": "feasible"}` or the overloaded link.
#[pyfunction]
fn check(py: Python<'_>, instance: &PyInstance) -> PyResult<Py<PyAny>> {
    let topology = instance.inner.topology();
    for inst in instance.inner.directions() {
        if let Feasibility::Infeasible {
            link,
            load,
            capacity,
        } = feasibility::decide(inst)
        {
            let witness = serde_json::json!({
                "verdict": "infeasible",
                "direction": inst.direction(),
                "link": topology.physical_link(inst.direction(), link),
                "port": topology.port(inst.direction(), link).to_string(),
                "load": load,
                "capacity": capacity,
            });
            return to_py(py, &witness);
        }
    }
    to_py(py, &serde_json::json!({ "verdict": "feasible" }))
}

#[pyfunction]
fn decide(instance: &PyInstance) -> bool {
    instance
        .inner
        .directions()
        .iter()
        .all(|i| feasibility::decide(i).is_feasible())
}

/// Builds a schedule; raises `ChainschedError` on infeasible input.
#[pyfunction]
fn schedule(py: Python<'_>, instance: &PyInstance) -> PyResult<PySchedule> {
    let inner = &instance.inner;
    let doc = py
        .detach(|| -> chainsched::Result<ScheduleDocument> {
            let mut parts = Vec::with_capacity(2);
            for inst in inner.directions() {
                parts.push(core_schedule::synthesize(&find(inst)?, inst)?);
            }
            let rtl = parts.pop().unwrap();
            let ltr = parts.pop().unwrap();
            Ok(ScheduleDocument::new(inner, ltr, rtl))
        })
        .map_err(err)?;
    Ok(PySchedule { doc })
}

/// Audit report as a dict with `verdict` and `violations`.
#[pyfunction]
fn validate(py: Python<'_>, schedule: &PySchedule, instance: &PyInstance) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &validator::validate_document(&schedule.doc, &instance.inner).map_err(err)?,
    )
}

/// Exhaustive search on one direction: `"found"`, `"exhausted-infeasible"`
/// or `"budget-exceeded"`.
#[pyfunction]
#[pyo3(signature = (instance, direction = "ltr", budget = oracle::DEFAULT_NODE_BUDGET))]
fn brute_force(instance: &PyInstance, direction: &str, budget: u64) -> PyResult<&'static str> {
    let outcome: OracleOutcome =
        oracle::brute_force(instance.inner.get(self::direction(direction)?), budget)
            .map_err(err)?;
    Ok(outcome.label())
}

#[pyfunction]
#[pyo3(signature = (switches, streams, periods = "0,1,2,3", model = "hub", seed = 0, feasible_only = false, max_attempts = 1000))]
fn generate(
    switches: u32,
    streams: usize,
    periods: &str,
    model: &str,
    seed: u64,
    feasible_only: bool,
    max_attempts: u64,
) -> PyResult<PyInstance> {
    let mut spec = GenSpec::new(
        switches,
        streams,
        periods.parse::<PeriodMix>().map_err(err)?,
    );
    spec.model = model.parse::<IntervalModel>().map_err(err)?;
    spec.seed = seed;
    spec.feasible_only = feasible_only;
    spec.max_attempts = max_attempts;
    let file = gen::generate(&spec).map_err(err)?;
    Ok(PyInstance {
        inner: file.normalize(PeriodPolicy::Reject).map_err(err)?,
    })
}

#[pymodule]
fn pychainsched(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ChainschedError", m.py().get_type::<ChainschedError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
