//! Python bindings for the `tsem` crate.
//!
//! Models load from the same JSON documents as the command line tool;
//! scenarios are passed as JSON text. States come back as dicts in
//! declaration order, with symbols as strings and the undefined value as
//! `"#"`.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tsem::delays::{compile_to_onestep, periodic_delayed, run_delayed};
use tsem::doc::{CounterexampleDoc, LoadedModel, ModelDocument, ScenarioDocument};
use tsem::engine::{periodic_computation, run, Intervention, Scenario};
use tsem::equivalence::{
    test_model_equivalence, test_rescalable_equivalence, EquivVerdict, ObservableSet, SamplerConfig,
};
use tsem::logic::{parse_cpltl, CpltlChecker};
use tsem::model::{Assignment, Model, Value};
use tsem::trace::PeriodicSeq;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load_model(text: &str) -> Result<LoadedModel, String> {
    ModelDocument::parse(text).and_then(|d| d.load()).map_err(err)
}

fn intervention(m: &LoadedModel, spec: Option<&str>) -> Result<Intervention, String> {
    spec.map_or(Ok(Intervention::empty()), |s| {
        Intervention::parse(s, m.signature()).map_err(err)
    })
}

fn scenario_parts(m: &LoadedModel, scenario: &str) -> Result<(PeriodicSeq, Assignment), String> {
    ScenarioDocument::parse(scenario)
        .and_then(|d| d.load(m.signature()))
        .map_err(err)
}

fn simulate_states(
    m: &LoadedModel,
    scenario: &str,
    steps: usize,
    spec: Option<&str>,
) -> Result<Vec<Assignment>, String> {
    let (ctx, init) = scenario_parts(m, scenario)?;
    let int = intervention(m, spec)?;
    let tr = match m {
        LoadedModel::OneStep(model) => run(&Scenario::new(model.clone(), ctx, init).map_err(err)?, &int, steps),
        LoadedModel::Delayed(dm) => run_delayed(dm, &ctx, &init, &int, steps),
    }
    .map_err(err)?;
    Ok(tr.states().to_vec())
}

fn periodic_seq(m: &LoadedModel, scenario: &str, spec: Option<&str>) -> Result<PeriodicSeq, String> {
    let (ctx, init) = scenario_parts(m, scenario)?;
    let int = intervention(m, spec)?;
    let comp = match m {
        LoadedModel::OneStep(model) => {
            periodic_computation(&Scenario::new(model.clone(), ctx, init).map_err(err)?, &int)
        }
        LoadedModel::Delayed(dm) => periodic_delayed(dm, &ctx, &init, &int),
    }
    .map_err(err)?;
    Ok(comp.seq)
}

fn check_formula(m: &LoadedModel, scenario: &str, at: usize, formula: &str) -> Result<bool, String> {
    let (ctx, init) = scenario_parts(m, scenario)?;
    let f = parse_cpltl(formula, m.signature()).map_err(err)?;
    let sc = match m {
        LoadedModel::OneStep(model) => Scenario::new(model.clone(), ctx, init),
        LoadedModel::Delayed(dm) => {
            let cm = compile_to_onestep(dm);
            let init = cm.lift_init(&init);
            Scenario::new(cm.model, ctx, init)
        }
    }
    .map_err(err)?;
    CpltlChecker::new(sc).check(at, &f).map_err(err)
}

fn onestep(m: &LoadedModel) -> Result<Arc<Model>, String> {
    match m {
        LoadedModel::OneStep(model) => Ok(model.clone()),
        LoadedModel::Delayed(_) => Err("equivalence testing needs one-step models; compile the delays first".into()),
    }
}

fn equivalence(
    a: &LoadedModel,
    b: &LoadedModel,
    observe: &[String],
    rescale: Option<usize>,
    cfg: &SamplerConfig,
) -> Result<Option<CounterexampleDoc>, String> {
    let (a, b) = (onestep(a)?, onestep(b)?);
    let obs = ObservableSet::new(&a, &b, observe).map_err(err)?;
    let verdict = match rescale {
        Some(k) => test_rescalable_equivalence(&a, &b, &obs, k, cfg),
        None => test_model_equivalence(&a, &b, &obs, cfg),
    }
    .map_err(err)?;
    Ok(match verdict {
        EquivVerdict::NoCounterexampleFound { .. } => None,
        EquivVerdict::Counterexample(cx) => Some(CounterexampleDoc::new(&cx, rescale)),
    })
}

fn py_err(e: String) -> PyErr {
    PyValueError::new_err(e)
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Int(n) => n.into_pyobject(py)?.into_any().unbind(),
        Value::Sym(s) => s.as_ref().into_pyobject(py)?.into_any().unbind(),
        Value::Undefined => "#".into_pyobject(py)?.into_any().unbind(),
    })
}

fn state_to_py<'py>(py: Python<'py>, a: &Assignment) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, v) in a.iter() {
        d.set_item(name, value_to_py(py, v)?)?;
    }
    Ok(d)
}

fn states_to_py<'py>(py: Python<'py>, states: &[Assignment]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    states.iter().map(|a| state_to_py(py, a)).collect()
}

type States<'py> = Vec<Bound<'py, PyDict>>;

/// A one-step or delayed model loaded from a JSON document.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: LoadedModel,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(document: &str) -> PyResult<Self> {
        load_model(document).map(|inner| PyModel { inner }).map_err(py_err)
    }

    /// Loads a model document from a file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| py_err(format!("{path}: {e}")))?;
        Self::new(&text)
    }

    #[getter]
    fn exogenous(&self) -> Vec<String> {
        self.inner.signature().exo_names().to_vec()
    }

    #[getter]
    fn endogenous(&self) -> Vec<String> {
        self.inner.signature().endo_names().to_vec()
    }

    #[getter]
    fn is_delayed(&self) -> bool {
        matches!(self.inner, LoadedModel::Delayed(_))
    }

    /// The first `steps` states under the scenario and interventions.
    #[pyo3(signature = (scenario, steps, intervene=None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        scenario: &str,
        steps: usize,
        intervene: Option<&str>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let states = simulate_states(&self.inner, scenario, steps, intervene).map_err(py_err)?;
        states_to_py(py, &states)
    }

    /// Normalized `(prefix, loop)` of the computation.
    #[pyo3(signature = (scenario, intervene=None))]
    fn periodic<'py>(
        &self,
        py: Python<'py>,
        scenario: &str,
        intervene: Option<&str>,
    ) -> PyResult<(States<'py>, States<'py>)> {
        let seq = periodic_seq(&self.inner, scenario, intervene).map_err(py_err)?;
        Ok((states_to_py(py, seq.prefix())?, states_to_py(py, seq.cycle())?))
    }

    /// Truth of a CPLTL formula at time `at`.
    fn check(&self, scenario: &str, at: usize, formula: &str) -> PyResult<bool> {
        check_formula(&self.inner, scenario, at, formula).map_err(py_err)
    }

    /// JSON document of the equivalent one-step model of a delayed model.
    fn compile_delays(&self) -> PyResult<String> {
        match &self.inner {
            LoadedModel::Delayed(dm) => {
                let cm = compile_to_onestep(dm);
                serde_json::to_string_pretty(&ModelDocument::from_model(&cm.model)).map_err(|e| py_err(e.to_string()))
            }
            LoadedModel::OneStep(_) => Err(py_err("not a delayed model".into())),
        }
    }
}

/// Searches for a counterexample to the equivalence of two one-step models.
/// Returns `None` when sampling finds none, otherwise the counterexample as
/// a dict.
#[pyfunction]
#[pyo3(signature = (a, b, observe, rescale=None, samples=200, seed=0))]
fn equivalence_counterexample<'py>(
    py: Python<'py>,
    a: &PyModel,
    b: &PyModel,
    observe: Vec<String>,
    rescale: Option<usize>,
    samples: usize,
    seed: u64,
) -> PyResult<Option<Bound<'py, PyAny>>> {
    let cfg = SamplerConfig {
        samples,
        seed,
        ..SamplerConfig::default()
    };
    let cx = equivalence(&a.inner, &b.inner, &observe, rescale, &cfg).map_err(py_err)?;
    cx.map(|cx| {
        let text = serde_json::to_string(&cx).map_err(|e| py_err(e.to_string()))?;
        py.import("json")?.call_method1("loads", (text,))
    })
    .transpose()
}

#[pymodule(name = "tsem")]
fn tsem_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(equivalence_counterexample, m)?)?;
    Ok(())
}
