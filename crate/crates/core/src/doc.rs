//! JSON documents: models, scenarios, reports and compilation name maps.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::delays::{CompiledModelMap, DelayedModel};
use crate::engine::empty_context;
use crate::equivalence::Counterexample;
use crate::model::{Assignment, Model, ModelError, Range, Signature, Value, VarKind, Variable};
use crate::trace::{FiniteTrace, PeriodicSeq};

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

impl DocError {
    /// Malformed text, as opposed to well-formed but invalid content.
    pub fn is_syntax(&self) -> bool {
        match self {
            DocError::Json(e) => e.is_syntax() || e.is_eof(),
            DocError::Model(ModelError::Syntax { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Onestep,
    Delayed,
}

/// A range: `{"int": [lo, hi]}` or a list of values. `"#"` in a list
/// stands for the undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeDoc {
    Int { int: [i64; 2] },
    Values(Vec<Json>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarDoc {
    pub name: String,
    pub range: RangeDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationDoc {
    pub name: String,
    pub range: RangeDoc,
    pub equation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub kind: ModelKind,
    #[serde(default)]
    pub exogenous: Vec<VarDoc>,
    pub endogenous: Vec<EquationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<u32>,
}

/// A validated model of either kind.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    OneStep(Arc<Model>),
    Delayed(Arc<DelayedModel>),
}

impl LoadedModel {
    pub fn signature(&self) -> &Signature {
        match self {
            LoadedModel::OneStep(m) => m.signature(),
            LoadedModel::Delayed(m) => m.signature(),
        }
    }
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Int(n) => Json::from(*n),
        Value::Sym(s) => Json::from(&**s),
        Value::Undefined => Json::from("#"),
    }
}

pub fn value_from_json(j: &Json) -> Result<Value, DocError> {
    match j {
        Json::Number(n) => n
            .as_i64()
            .map(Value::Int)
            .ok_or_else(|| DocError::Invalid(format!("{n} is not an integer"))),
        Json::String(s) => Ok(Value::from(s.as_str())),
        Json::Bool(b) => Ok(Value::Int(*b as i64)),
        other => Err(DocError::Invalid(format!("{other} is not a value"))),
    }
}

impl RangeDoc {
    pub fn to_range(&self) -> Result<Range, DocError> {
        Ok(match self {
            RangeDoc::Int { int: [lo, hi] } => Range::Interval { lo: *lo, hi: *hi },
            RangeDoc::Values(vs) => {
                let values = vs.iter().map(value_from_json).collect::<Result<Vec<_>, _>>()?;
                let undefined = values.contains(&Value::Undefined);
                let defined: Vec<Value> = values.into_iter().filter(|v| *v != Value::Undefined).collect();
                match (undefined, defined.is_empty()) {
                    (true, false) => Range::Values(defined).with_undefined(),
                    _ => Range::Values(defined),
                }
            }
        })
    }

    pub fn from_range(r: &Range) -> RangeDoc {
        match r {
            Range::Interval { lo, hi } => RangeDoc::Int { int: [*lo, *hi] },
            Range::Values(vs) => RangeDoc::Values(vs.iter().map(value_to_json).collect()),
            Range::WithUndefined(inner) => {
                let mut vs: Vec<Json> = inner.values().iter().map(value_to_json).collect();
                vs.push(value_to_json(&Value::Undefined));
                RangeDoc::Values(vs)
            }
        }
    }
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<ModelDocument, DocError> {
        Ok(serde_json::from_str(text)?)
    }

    fn signature(&self) -> Result<Signature, DocError> {
        let exo = self
            .exogenous
            .iter()
            .map(|v| Ok(Variable::exogenous(&v.name, v.range.to_range()?)))
            .collect::<Result<Vec<_>, DocError>>()?;
        let endo = self
            .endogenous
            .iter()
            .map(|v| Ok(Variable::endogenous(&v.name, v.range.to_range()?)))
            .collect::<Result<Vec<_>, DocError>>()?;
        Ok(Signature::new(exo, endo)?)
    }

    /// Validates the document into a model of the declared kind.
    pub fn load(&self) -> Result<LoadedModel, DocError> {
        let sig = self.signature()?;
        let eqs = self.endogenous.iter().map(|v| (v.name.as_str(), v.equation.as_str()));
        match self.kind {
            ModelKind::Onestep => {
                if self.xi.is_some() {
                    return Err(DocError::Invalid("\"xi\" is only meaningful for delayed models".into()));
                }
                Ok(LoadedModel::OneStep(Arc::new(Model::from_sources(sig, eqs)?)))
            }
            ModelKind::Delayed => Ok(LoadedModel::Delayed(Arc::new(DelayedModel::from_sources(
                sig, eqs, self.xi,
            )?))),
        }
    }

    pub fn from_model(m: &Model) -> ModelDocument {
        let sig = m.signature();
        ModelDocument {
            kind: ModelKind::Onestep,
            exogenous: sig
                .exogenous()
                .iter()
                .map(|v| VarDoc {
                    name: v.name.clone(),
                    range: RangeDoc::from_range(&v.range),
                })
                .collect(),
            endogenous: sig
                .endogenous()
                .iter()
                .enumerate()
                .map(|(i, v)| EquationDoc {
                    name: v.name.clone(),
                    range: RangeDoc::from_range(&v.range),
                    equation: m.equation(i).to_string(),
                })
                .collect(),
            xi: None,
        }
    }
}

pub fn assignment_to_json(a: &Assignment) -> Map<String, Json> {
    a.iter().map(|(n, v)| (n.to_string(), value_to_json(v))).collect()
}

pub fn assignment_from_json(sig: &Signature, kind: VarKind, m: &Map<String, Json>) -> Result<Assignment, DocError> {
    let pairs = m
        .iter()
        .map(|(n, v)| Ok((n.as_str(), value_from_json(v)?)))
        .collect::<Result<Vec<_>, DocError>>()?;
    Ok(sig.assignment(kind, pairs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextDoc {
    #[serde(default)]
    pub prefix: Vec<Map<String, Json>>,
    #[serde(rename = "loop")]
    pub cycle: Vec<Map<String, Json>>,
}

impl ContextDoc {
    pub fn from_seq(s: &PeriodicSeq) -> ContextDoc {
        ContextDoc {
            prefix: s.prefix().iter().map(assignment_to_json).collect(),
            cycle: s.cycle().iter().map(assignment_to_json).collect(),
        }
    }
}

/// Context and initial state. The context may be omitted for models
/// without exogenous variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextDoc>,
    pub init: Map<String, Json>,
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<ScenarioDocument, DocError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(&self, sig: &Signature) -> Result<(PeriodicSeq, Assignment), DocError> {
        let ctx = match &self.context {
            None if sig.exogenous().is_empty() => empty_context(),
            None => {
                return Err(DocError::Invalid(
                    "the model has exogenous variables but no context is given".into(),
                ))
            }
            Some(c) => {
                let conv = |ms: &[Map<String, Json>]| {
                    ms.iter()
                        .map(|m| assignment_from_json(sig, VarKind::Exogenous, m))
                        .collect::<Result<Vec<_>, _>>()
                };
                PeriodicSeq::new(conv(&c.prefix)?, conv(&c.cycle)?)
                    .map_err(|e| DocError::Invalid(format!("context: {e}")))?
            }
        };
        let init = assignment_from_json(sig, VarKind::Endogenous, &self.init)?;
        Ok((ctx, init))
    }
}

/// `true`, `false` or `"no-counterexample-found"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Verdict {
    Bool(bool),
    Text(String),
}

impl Verdict {
    pub fn no_counterexample() -> Verdict {
        Verdict::Text("no-counterexample-found".into())
    }

    /// The process exit status matching this verdict.
    pub fn exit_code(&self) -> u8 {
        match self {
            Verdict::Bool(true) => 0,
            Verdict::Bool(false) => 1,
            Verdict::Text(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Map<String, Json>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Vec<Map<String, Json>>>,
    #[serde(default, rename = "loop", skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<Map<String, Json>>>,
}

impl TraceDoc {
    pub fn finite(tr: &FiniteTrace) -> TraceDoc {
        TraceDoc {
            states: Some(tr.states().iter().map(assignment_to_json).collect()),
            ..TraceDoc::default()
        }
    }

    pub fn periodic(s: &PeriodicSeq) -> TraceDoc {
        let c = ContextDoc::from_seq(s);
        TraceDoc {
            states: None,
            prefix: Some(c.prefix),
            cycle: Some(c.cycle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleDoc {
    pub direction: String,
    pub intervention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<usize>,
    pub context: ContextDoc,
    pub given: Map<String, Json>,
    pub closest: Map<String, Json>,
    pub index: usize,
    pub variable: String,
    pub expected: Json,
    pub found: Json,
}

impl CounterexampleDoc {
    pub fn new(cx: &Counterexample, rescale: Option<usize>) -> CounterexampleDoc {
        CounterexampleDoc {
            direction: cx.direction.to_string(),
            intervention: cx.intervention.to_string(),
            rescale,
            context: ContextDoc::from_seq(&cx.context),
            given: assignment_to_json(&cx.given),
            closest: assignment_to_json(&cx.closest),
            index: cx.index,
            variable: cx.variable.clone(),
            expected: value_to_json(&cx.expected),
            found: value_to_json(&cx.found),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stats {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

/// Machine-readable outcome of a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub command: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleDoc>,
    pub stats: Stats,
}

impl Report {
    pub fn new(command: &str, verdict: Verdict) -> Report {
        Report {
            command: command.into(),
            verdict,
            trace: None,
            counterexample: None,
            stats: Stats::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDoc {
    pub source: String,
    pub depth: u32,
    pub name: String,
}

/// Sidecar written next to a compiled model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameMap {
    pub originals: Vec<String>,
    pub chains: Vec<ChainDoc>,
}

impl NameMap {
    /// Chains are listed in the compiled model's declaration order.
    pub fn new(cm: &CompiledModelMap) -> NameMap {
        let mut chains: Vec<ChainDoc> = cm
            .fresh
            .iter()
            .map(|((source, depth), name)| ChainDoc {
                source: source.clone(),
                depth: *depth,
                name: name.clone(),
            })
            .collect();
        let sig = cm.model.signature();
        chains.sort_by_key(|c| sig.lookup(&c.name).map(|(_, i)| i));
        NameMap {
            originals: cm.originals().to_vec(),
            chains,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TREATMENT: &str = r#"{
        "kind": "onestep",
        "exogenous": [{"name": "U_T", "range": {"int": [0, 1]}}],
        "endogenous": [
            {"name": "T", "range": {"int": [0, 1]}, "equation": "U_T"},
            {"name": "R", "range": [0, "half", 1],
             "equation": "if T = 0 && R != 1 then 0 else if T = 1 && R = 0 then half else if (T = 1 && R = half) || R = 1 then 1 else R"}
        ]
    }"#;

    #[test]
    fn model_round_trip() {
        let doc = ModelDocument::parse(TREATMENT).unwrap();
        let LoadedModel::OneStep(m) = doc.load().unwrap() else {
            panic!("one-step expected")
        };
        let again = ModelDocument::from_model(&m);
        let LoadedModel::OneStep(m2) = again.load().unwrap() else {
            panic!("one-step expected")
        };
        assert_eq!(m, m2);
    }

    #[test]
    fn undefined_in_range_lists() {
        let r = RangeDoc::Values(vec![Json::from(0), Json::from(1), Json::from("#")])
            .to_range()
            .unwrap();
        assert!(r.contains(&Value::Undefined));
        assert_eq!(
            RangeDoc::from_range(&r),
            RangeDoc::Values(vec![Json::from(0), Json::from(1), Json::from("#")])
        );
        let r = Range::Interval { lo: 0, hi: 2 }.with_undefined();
        assert_eq!(RangeDoc::from_range(&r).to_range().unwrap().values(), r.values());
    }

    #[test]
    fn error_classes() {
        assert!(ModelDocument::parse("{").unwrap_err().is_syntax());
        assert!(!ModelDocument::parse(r#"{"kind": "onestep"}"#).unwrap_err().is_syntax());
        let bad_eq = TREATMENT.replace("\"U_T\"}", "\"U_T &&\"}");
        assert!(ModelDocument::parse(&bad_eq).unwrap().load().unwrap_err().is_syntax());
        let unknown = TREATMENT.replace("\"U_T\"}", "\"Q\"}");
        assert!(!ModelDocument::parse(&unknown).unwrap().load().unwrap_err().is_syntax());
    }

    #[test]
    fn scenario_needs_exact_cover() {
        let doc = ModelDocument::parse(TREATMENT).unwrap().load().unwrap();
        let ok = ScenarioDocument::parse(
            r#"{"context": {"prefix": [{"U_T": 1}], "loop": [{"U_T": 0}]}, "init": {"T": 0, "R": "half"}}"#,
        )
        .unwrap();
        let (ctx, init) = ok.load(doc.signature()).unwrap();
        assert_eq!((ctx.prefix_len(), ctx.loop_len()), (1, 1));
        assert_eq!(init.get("R"), Some(&Value::sym("half")));
        let missing = ScenarioDocument::parse(r#"{"context": {"loop": [{"U_T": 0}]}, "init": {"T": 0}}"#).unwrap();
        assert!(missing.load(doc.signature()).is_err());
        let empty_loop = ScenarioDocument::parse(r#"{"context": {"loop": []}, "init": {"T": 0, "R": 0}}"#).unwrap();
        assert!(empty_loop.load(doc.signature()).is_err());
    }

    #[test]
    fn report_round_trip_is_byte_identical() {
        let mut r = Report::new("periodic", Verdict::Bool(true));
        let a = Assignment::from_pairs([("T", Value::Int(0)), ("R", Value::sym("half"))]);
        r.trace = Some(TraceDoc::periodic(&PeriodicSeq::new(vec![a.clone()], vec![a]).unwrap()));
        r.stats.prefix_len = Some(1);
        r.stats.loop_len = Some(1);
        let text = r.to_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert!(text.find("\"T\"").unwrap() < text.find("\"R\"").unwrap());
    }
}
