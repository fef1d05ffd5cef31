//! Computations of causal scenarios under time-indexed interventions.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::lexer::{Cursor, SyntaxError, Tok};
use crate::model::{Assignment, EvalError, Model, Signature, Value, VarKind};
use crate::trace::{FiniteTrace, PeriodicSeq};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterventionError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown variable {0} in intervention")]
    UnknownVariable(String),
    #[error("{0} is exogenous; only endogenous variables can be intervened on")]
    Exogenous(String),
    #[error("value {value} is outside the range of {var}")]
    OutOfRange { var: String, value: Value },
    #[error("{var} is intervened on twice at time {time}")]
    DuplicateTime { var: String, time: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InterventionEntry {
    pub time: usize,
    pub var: String,
    pub value: Value,
}

/// A finite set of `(variable, time, value)` entries with distinct times per
/// variable. Entries are kept sorted by time, then variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Intervention {
    entries: Vec<InterventionEntry>,
}

impl Intervention {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, usize, Value)>,
    ) -> Result<Self, InterventionError> {
        let mut entries: Vec<InterventionEntry> = entries
            .into_iter()
            .map(|(var, time, value)| InterventionEntry {
                time,
                var: var.into(),
                value,
            })
            .collect();
        entries.sort();
        for w in entries.windows(2) {
            if w[0].time == w[1].time && w[0].var == w[1].var {
                return Err(InterventionError::DuplicateTime {
                    var: w[0].var.clone(),
                    time: w[0].time,
                });
            }
        }
        Ok(Intervention { entries })
    }

    /// Parses `name@t:=value, ...` (possibly empty) and checks it against `sig`.
    pub fn parse(src: &str, sig: &Signature) -> Result<Self, InterventionError> {
        let mut cur = Cursor::new(src)?;
        let int = if *cur.peek() == Tok::End {
            Intervention::empty()
        } else {
            Self::parse_entries(&mut cur)?
        };
        cur.expect_end()?;
        int.check(sig)?;
        Ok(int)
    }

    /// Comma-separated entries; the caller handles surrounding brackets.
    pub(crate) fn parse_entries(cur: &mut Cursor) -> Result<Self, InterventionError> {
        let mut raw = Vec::new();
        loop {
            let var = match cur.peek().clone() {
                Tok::Ident(name) => name,
                _ => return Err(cur.unexpected("a variable name").into()),
            };
            cur.bump();
            cur.expect(&Tok::At)?;
            let time = match *cur.peek() {
                Tok::Int(n) => n as usize,
                _ => return Err(cur.unexpected("a time step").into()),
            };
            cur.bump();
            cur.expect(&Tok::Assign)?;
            let value = parse_value(cur)?;
            raw.push((var, time, value));
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
        Intervention::new(raw)
    }

    pub fn entries(&self) -> &[InterventionEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Largest intervened time (0 when empty).
    pub fn max_time(&self) -> usize {
        self.entries.iter().map(|e| e.time).max().unwrap_or(0)
    }

    pub fn value_at(&self, var: &str, time: usize) -> Option<&Value> {
        self.entries
            .iter()
            .find(|e| e.time == time && e.var == var)
            .map(|e| &e.value)
    }

    /// All variables endogenous and all values in range.
    pub fn check(&self, sig: &Signature) -> Result<(), InterventionError> {
        for e in &self.entries {
            match sig.lookup(&e.var) {
                None => return Err(InterventionError::UnknownVariable(e.var.clone())),
                Some((VarKind::Exogenous, _)) => return Err(InterventionError::Exogenous(e.var.clone())),
                Some((VarKind::Endogenous, i)) => {
                    if !sig.endogenous()[i].range.contains(&e.value) {
                        return Err(InterventionError::OutOfRange {
                            var: e.var.clone(),
                            value: e.value.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Every time multiplied by `k`.
    pub fn scaled(&self, k: usize) -> Intervention {
        let mut entries: Vec<InterventionEntry> = self
            .entries
            .iter()
            .map(|e| InterventionEntry {
                time: e.time * k,
                ..e.clone()
            })
            .collect();
        entries.sort();
        Intervention { entries }
    }

    /// Union of two interventions; fails if they share a (variable, time).
    pub fn merge(&self, other: &Intervention) -> Result<Intervention, InterventionError> {
        Intervention::new(
            self.entries
                .iter()
                .chain(&other.entries)
                .map(|e| (e.var.clone(), e.time, e.value.clone())),
        )
    }
}

/// An intervention or atom value: integer, symbol or `#`.
pub(crate) fn parse_value(cur: &mut Cursor) -> Result<Value, SyntaxError> {
    match cur.peek().clone() {
        Tok::Int(n) => {
            cur.bump();
            Ok(Value::Int(n))
        }
        Tok::Minus => {
            cur.bump();
            match *cur.peek() {
                Tok::Int(n) => {
                    cur.bump();
                    Ok(Value::Int(-n))
                }
                _ => Err(cur.unexpected("an integer")),
            }
        }
        Tok::Ident(s) | Tok::Str(s) => {
            cur.bump();
            Ok(Value::sym(&s))
        }
        Tok::Hash => {
            cur.bump();
            Ok(Value::Undefined)
        }
        _ => Err(cur.unexpected("a value")),
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match &e.value {
                Value::Sym(s) if !crate::model::is_identifier(s) => write!(f, "{}@{}:='{s}'", e.var, e.time)?,
                v => write!(f, "{}@{}:={v}", e.var, e.time)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Intervention(#[from] InterventionError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// A model together with a temporal context and a default initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    model: Arc<Model>,
    context: PeriodicSeq,
    init: Assignment,
}

impl Scenario {
    pub fn new(model: Arc<Model>, context: PeriodicSeq, init: Assignment) -> Result<Self, EngineError> {
        let sig = model.signature();
        if **context.names() != **sig.exo_names() {
            return Err(EngineError::Scenario(format!(
                "context ranges over ({}) but the exogenous variables are ({})",
                context.names().join(", "),
                sig.exo_names().join(", ")
            )));
        }
        for a in context.prefix().iter().chain(context.cycle()) {
            sig.check_assignment(VarKind::Exogenous, a)
                .map_err(|e| EngineError::Scenario(format!("context: {e}")))?;
        }
        sig.check_assignment(VarKind::Endogenous, &init)
            .map_err(|e| EngineError::Scenario(format!("initial state: {e}")))?;
        Ok(Scenario { model, context, init })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn context(&self) -> &PeriodicSeq {
        &self.context
    }

    pub fn init(&self) -> &Assignment {
        &self.init
    }

    pub fn with_init(&self, init: Assignment) -> Result<Self, EngineError> {
        Scenario::new(self.model.clone(), self.context.clone(), init)
    }
}

/// The context of a model without exogenous variables.
pub fn empty_context() -> PeriodicSeq {
    PeriodicSeq::constant(Assignment::new(Arc::from(Vec::<String>::new()), Vec::new()))
}

/// An ultimately periodic computation and what produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Computation {
    pub seq: PeriodicSeq,
    pub scenario: Scenario,
    pub intervention: Intervention,
}

/// `init` overridden by the time-0 entries of `int`.
pub fn intervention_initial(init: &Assignment, int: &Intervention) -> Assignment {
    let mut out = init.clone();
    for e in int.entries().iter().filter(|e| e.time == 0) {
        if out.position(&e.var).is_some() {
            out = out.with(&e.var, e.value.clone());
        }
    }
    out
}

/// Incremental generator of `C^int(M, ū, v)` that closes the loop as soon as
/// a (state, context position) pair repeats after all interventions and the
/// context prefix have been passed.
pub struct Stepper {
    model: Arc<Model>,
    context: PeriodicSeq,
    pins: HashMap<usize, Vec<(usize, Value)>>,
    states: Vec<Vec<Value>>,
    seen: HashMap<(Vec<Value>, usize), usize>,
    n_star: usize,
    loop_start: Option<usize>,
}

impl Stepper {
    pub fn new(sc: &Scenario, int: &Intervention) -> Result<Self, EngineError> {
        let sig = sc.model.signature();
        int.check(sig)?;
        let mut pins: HashMap<usize, Vec<(usize, Value)>> = HashMap::new();
        for e in int.entries() {
            let (_, idx) = sig.lookup(&e.var).expect("checked above");
            pins.entry(e.time).or_default().push((idx, e.value.clone()));
        }
        let mut init = sc.init.values().to_vec();
        for (idx, v) in pins.get(&0).into_iter().flatten() {
            init[*idx] = v.clone();
        }
        Ok(Stepper {
            model: sc.model.clone(),
            context: sc.context.clone(),
            n_star: sc.context.prefix_len().max(int.max_time()),
            pins,
            states: vec![init],
            seen: HashMap::new(),
            loop_start: None,
        })
    }

    fn ctx_pos(&self, i: usize) -> usize {
        (i - self.context.prefix_len()) % self.context.loop_len()
    }

    /// Extends the computation by one state, or closes the loop.
    fn advance(&mut self) -> Result<(), EngineError> {
        let i = self.states.len() - 1;
        if i >= self.n_star {
            let key = (self.states[i].clone(), self.ctx_pos(i));
            if let Some(&j) = self.seen.get(&key) {
                self.states.pop();
                self.loop_start = Some(j);
                return Ok(());
            }
            self.seen.insert(key, i);
        }
        let pins = self.pins.get(&(i + 1));
        let u = self.context.index(i).values();
        let next = self
            .model
            .step_values(u, &self.states[i], &mut |x| {
                pins.and_then(|ps| ps.iter().find(|(idx, _)| *idx == x))
                    .map(|(_, v)| v.clone())
            })
            .map_err(|e| e.at_step(i + 1))?;
        self.states.push(next);
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.loop_start.is_some()
    }

    /// Prefix and loop lengths once the loop has been found.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.loop_start.map(|j| (j, self.states.len() - j))
    }

    /// Values of the endogenous variables at step `i`.
    pub fn state(&mut self, i: usize) -> Result<&[Value], EngineError> {
        while self.loop_start.is_none() && self.states.len() <= i {
            self.advance()?;
        }
        let idx = match self.loop_start {
            Some(j) if i >= self.states.len() => j + (i - j) % (self.states.len() - j),
            _ => i,
        };
        Ok(&self.states[idx])
    }

    /// Runs to loop closure and returns the (unnormalized) representation.
    pub fn finish(mut self) -> Result<PeriodicSeq, EngineError> {
        while self.loop_start.is_none() {
            self.advance()?;
        }
        let j = self.loop_start.expect("closed");
        let names = self.model.signature().endo_names().clone();
        let wrap = |vs: Vec<Value>| Assignment::new(names.clone(), vs);
        let mut states = self.states;
        let cycle: Vec<Assignment> = states.split_off(j).into_iter().map(wrap).collect();
        let prefix: Vec<Assignment> = states.into_iter().map(wrap).collect();
        Ok(PeriodicSeq::new(prefix, cycle).expect("loop is non-empty"))
    }
}

/// The first `horizon` states of `C^int(M, ū, v)`.
pub fn run(sc: &Scenario, int: &Intervention, horizon: usize) -> Result<FiniteTrace, EngineError> {
    if horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    let sig = sc.model.signature();
    int.check(sig)?;
    let names = sig.endo_names().clone();
    let mut states = vec![intervention_initial(&sc.init, int)];
    for i in 1..horizon {
        let prev = &states[i - 1];
        let next = sc
            .model
            .step_values(sc.context.index(i - 1).values(), prev.values(), &mut |x| {
                int.value_at(&names[x], i).cloned()
            })
            .map_err(|e| e.at_step(i))?;
        states.push(Assignment::new(names.clone(), next));
    }
    Ok(FiniteTrace::new(states).expect("non-empty and uniform"))
}

/// Normalized ultimately periodic representation of `C^int(M, ū, v)`.
pub fn periodic_computation(sc: &Scenario, int: &Intervention) -> Result<Computation, EngineError> {
    let seq = Stepper::new(sc, int)?.finish()?.normalize();
    Ok(Computation {
        seq,
        scenario: sc.clone(),
        intervention: int.clone(),
    })
}
