//! Signatures, finite-ranged variables, assignments and one-step causal models.

mod expr;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

pub use expr::{eval_expr, BinOp, EvalError, Expr, Slot, VarRef};

/// Names that collide with formula operators or equation keywords.
pub const RESERVED_NAMES: &[&str] = &[
    "X", "Y", "U", "S", "F", "G", "P", "H", "true", "false", "if", "then", "else", "mod",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(Arc<str>),
    /// The `#` marker carried by compiled history variables.
    Undefined,
}

impl Value {
    pub fn sym(s: &str) -> Value {
        Value::Sym(Arc::from(s))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => f.write_str(s),
            Value::Undefined => f.write_str("#"),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        if s == "#" {
            Value::Undefined
        } else {
            Value::sym(s)
        }
    }
}

/// Static type of an expression, derived from ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ty {
    Int,
    Sym,
    /// Ranges mixing integers and symbols, such as `{0, half, 1}`.
    Mixed,
    /// The bare `#` literal.
    Undef,
}

impl Ty {
    fn of_value(v: &Value) -> Ty {
        match v {
            Value::Int(_) => Ty::Int,
            Value::Sym(_) => Ty::Sym,
            Value::Undefined => Ty::Undef,
        }
    }

    fn is_int(self) -> bool {
        self == Ty::Int
    }

    fn join(self, other: Ty) -> Ty {
        match (self, other) {
            (a, b) if a == b => a,
            (Ty::Undef, t) | (t, Ty::Undef) => t,
            _ => Ty::Mixed,
        }
    }

    fn comparable(self, other: Ty) -> bool {
        !matches!((self, other), (Ty::Int, Ty::Sym) | (Ty::Sym, Ty::Int))
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Sym => "symbol",
            Ty::Mixed => "mixed",
            Ty::Undef => "#",
        })
    }
}

/// Finite, non-empty set of values a variable may take.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Range {
    /// Explicit list of distinct values (symbols and/or integers).
    Values(Vec<Value>),
    Interval {
        lo: i64,
        hi: i64,
    },
    /// The inner range extended with the `#` marker.
    WithUndefined(Box<Range>),
}

impl Range {
    pub fn symbols<S: AsRef<str>>(names: &[S]) -> Range {
        Range::Values(names.iter().map(|s| Value::sym(s.as_ref())).collect())
    }

    pub fn interval(lo: i64, hi: i64) -> Range {
        Range::Interval { lo, hi }
    }

    pub fn binary() -> Range {
        Range::interval(0, 1)
    }

    pub fn with_undefined(self) -> Range {
        match self {
            r @ Range::WithUndefined(_) => r,
            r => Range::WithUndefined(Box::new(r)),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Range::Values(vs) => vs.contains(v),
            Range::Interval { lo, hi } => matches!(v, Value::Int(n) if lo <= n && n <= hi),
            Range::WithUndefined(inner) => *v == Value::Undefined || inner.contains(v),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Range::Values(vs) => vs.len(),
            Range::Interval { lo, hi } => (hi - lo + 1).max(0) as usize,
            Range::WithUndefined(inner) => inner.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values, in declaration order (`#` last).
    pub fn values(&self) -> Vec<Value> {
        match self {
            Range::Values(vs) => vs.clone(),
            Range::Interval { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Range::WithUndefined(inner) => {
                let mut vs = inner.values();
                vs.push(Value::Undefined);
                vs
            }
        }
    }

    pub fn value_at(&self, i: usize) -> Value {
        match self {
            Range::Values(vs) => vs[i].clone(),
            Range::Interval { lo, .. } => Value::Int(lo + i as i64),
            Range::WithUndefined(inner) => {
                if i == inner.len() {
                    Value::Undefined
                } else {
                    inner.value_at(i)
                }
            }
        }
    }

    pub(crate) fn ty(&self) -> Ty {
        match self {
            Range::Interval { .. } => Ty::Int,
            Range::Values(vs) => vs.iter().map(Ty::of_value).reduce(Ty::join).unwrap_or(Ty::Mixed),
            Range::WithUndefined(inner) => inner.ty(),
        }
    }

    fn check(&self, var: &str) -> Result<(), ModelError> {
        match self {
            Range::Interval { lo, hi } if lo > hi => Err(ModelError::EmptyRange(var.to_string())),
            Range::Values(vs) if vs.is_empty() => Err(ModelError::EmptyRange(var.to_string())),
            Range::Values(vs) => {
                let mut seen = HashSet::new();
                for v in vs {
                    if *v == Value::Undefined {
                        return Err(ModelError::InvalidRange {
                            var: var.to_string(),
                            reason: "`#` may only extend a range".into(),
                        });
                    }
                    if let Value::Sym(s) = v {
                        if !is_identifier(s) {
                            return Err(ModelError::InvalidRange {
                                var: var.to_string(),
                                reason: format!("symbol {s:?} is not an identifier"),
                            });
                        }
                    }
                    if !seen.insert(v) {
                        return Err(ModelError::InvalidRange {
                            var: var.to_string(),
                            reason: format!("duplicate value {v}"),
                        });
                    }
                }
                Ok(())
            }
            Range::WithUndefined(inner) => {
                if matches!(**inner, Range::WithUndefined(_)) {
                    return Err(ModelError::InvalidRange {
                        var: var.to_string(),
                        reason: "nested `#` extension".into(),
                    });
                }
                inner.check(var)
            }
            Range::Interval { .. } => Ok(()),
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Values(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Range::Interval { lo, hi } => write!(f, "{lo}..{hi}"),
            Range::WithUndefined(inner) => write!(f, "{inner} + #"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Exogenous,
    Endogenous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub range: Range,
}

impl Variable {
    pub fn exogenous(name: &str, range: Range) -> Self {
        Variable {
            name: name.to_string(),
            kind: VarKind::Exogenous,
            range,
        }
    }

    pub fn endogenous(name: &str, range: Range) -> Self {
        Variable {
            name: name.to_string(),
            kind: VarKind::Endogenous,
            range,
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("unknown variable {name} (in {context})")]
    UnknownVariable { name: String, context: String },
    #[error("{0} is a reserved word and cannot name a variable")]
    ReservedName(String),
    #[error("{0} is not a valid identifier")]
    InvalidName(String),
    #[error("type error in equation of {var}: {message}")]
    TypeError { var: String, message: String },
    #[error("range of {0} is empty")]
    EmptyRange(String),
    #[error("invalid range for {var}: {reason}")]
    InvalidRange { var: String, reason: String },
    #[error("no equation for endogenous variable {0}")]
    MissingEquation(String),
    #[error("equation given for exogenous variable {0}")]
    EquationForExogenous(String),
    #[error("a model needs at least one endogenous variable")]
    NoEndogenous,
    #[error("in equation of {var}: {message}")]
    BadReference { var: String, message: String },
    #[error("syntax error in equation of {var}: {source}")]
    Syntax {
        var: String,
        #[source]
        source: crate::lexer::SyntaxError,
    },
    #[error("{0}")]
    Assignment(String),
}

/// Exogenous and endogenous variables with their ranges.
#[derive(Debug, Clone)]
pub struct Signature {
    exogenous: Vec<Variable>,
    endogenous: Vec<Variable>,
    exo_names: Arc<[String]>,
    endo_names: Arc<[String]>,
    lookup: HashMap<String, (VarKind, usize)>,
}

impl PartialEq for Signature {
    fn eq(&self, other: &Self) -> bool {
        self.exogenous == other.exogenous && self.endogenous == other.endogenous
    }
}

impl Eq for Signature {}

impl Signature {
    pub fn new(exogenous: Vec<Variable>, endogenous: Vec<Variable>) -> Result<Self, ModelError> {
        if endogenous.is_empty() {
            return Err(ModelError::NoEndogenous);
        }
        let mut lookup = HashMap::new();
        for (kind, vars) in [(VarKind::Exogenous, &exogenous), (VarKind::Endogenous, &endogenous)] {
            for (i, v) in vars.iter().enumerate() {
                if !is_identifier(&v.name) {
                    return Err(ModelError::InvalidName(v.name.clone()));
                }
                if RESERVED_NAMES.contains(&v.name.as_str()) {
                    return Err(ModelError::ReservedName(v.name.clone()));
                }
                v.range.check(&v.name)?;
                if lookup.insert(v.name.clone(), (kind, i)).is_some() {
                    return Err(ModelError::DuplicateName(v.name.clone()));
                }
            }
        }
        let mut exogenous = exogenous;
        let mut endogenous = endogenous;
        exogenous.iter_mut().for_each(|v| v.kind = VarKind::Exogenous);
        endogenous.iter_mut().for_each(|v| v.kind = VarKind::Endogenous);
        Ok(Signature {
            exo_names: exogenous.iter().map(|v| v.name.clone()).collect(),
            endo_names: endogenous.iter().map(|v| v.name.clone()).collect(),
            exogenous,
            endogenous,
            lookup,
        })
    }

    pub fn exogenous(&self) -> &[Variable] {
        &self.exogenous
    }

    pub fn endogenous(&self) -> &[Variable] {
        &self.endogenous
    }

    pub fn exo_names(&self) -> &Arc<[String]> {
        &self.exo_names
    }

    pub fn endo_names(&self) -> &Arc<[String]> {
        &self.endo_names
    }

    pub fn vars(&self, kind: VarKind) -> &[Variable] {
        match kind {
            VarKind::Exogenous => &self.exogenous,
            VarKind::Endogenous => &self.endogenous,
        }
    }

    pub fn var(&self, kind: VarKind, index: usize) -> &Variable {
        &self.vars(kind)[index]
    }

    pub fn lookup(&self, name: &str) -> Option<(VarKind, usize)> {
        self.lookup.get(name).copied()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.lookup(name).map(|(k, i)| self.var(k, i))
    }

    fn names(&self, kind: VarKind) -> &Arc<[String]> {
        match kind {
            VarKind::Exogenous => &self.exo_names,
            VarKind::Endogenous => &self.endo_names,
        }
    }

    /// True if `sym` appears in some declared range.
    fn declares_symbol(&self, sym: &str) -> bool {
        let v = Value::sym(sym);
        self.exogenous
            .iter()
            .chain(&self.endogenous)
            .any(|var| var.range.contains(&v))
    }

    /// Builds an assignment of the exogenous or endogenous variables from
    /// name/value pairs, requiring every variable exactly once and in range.
    pub fn assignment<I, S>(&self, kind: VarKind, pairs: I) -> Result<Assignment, ModelError>
    where
        I: IntoIterator<Item = (S, Value)>,
        S: AsRef<str>,
    {
        let vars = self.vars(kind);
        let mut values: Vec<Option<Value>> = vec![None; vars.len()];
        for (name, value) in pairs {
            let name = name.as_ref();
            let idx = vars
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| ModelError::Assignment(format!("{name} is not an {} variable", kind_word(kind))))?;
            if !vars[idx].range.contains(&value) {
                return Err(ModelError::Assignment(format!(
                    "value {value} is outside the range {} of {name}",
                    vars[idx].range
                )));
            }
            if values[idx].replace(value).is_some() {
                return Err(ModelError::Assignment(format!("{name} is assigned twice")));
            }
        }
        let values = values
            .into_iter()
            .zip(vars)
            .map(|(v, var)| v.ok_or_else(|| ModelError::Assignment(format!("{} is not assigned", var.name))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Assignment::new(self.names(kind).clone(), values))
    }

    /// Checks that `a` is a complete in-range assignment of the given kind.
    pub fn check_assignment(&self, kind: VarKind, a: &Assignment) -> Result<(), ModelError> {
        let vars = self.vars(kind);
        if a.names().len() != vars.len() || a.names().iter().zip(vars).any(|(n, v)| *n != v.name) {
            return Err(ModelError::Assignment(format!(
                "assignment ({}) does not cover exactly the {} variables",
                a.names().join(", "),
                kind_word(kind)
            )));
        }
        for (v, var) in a.values().iter().zip(vars) {
            if !var.range.contains(v) {
                return Err(ModelError::Assignment(format!(
                    "value {v} is outside the range {} of {}",
                    var.range, var.name
                )));
            }
        }
        Ok(())
    }

    /// Enumerates every complete assignment of the given kind, in
    /// lexicographic order of range positions.
    pub fn all_assignments(&self, kind: VarKind) -> impl Iterator<Item = Assignment> + '_ {
        let vars = self.vars(kind);
        let names = self.names(kind).clone();
        let sizes: Vec<usize> = vars.iter().map(|v| v.range.len()).collect();
        let mut digits = vec![0usize; vars.len()];
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let values = digits.iter().zip(vars).map(|(&d, v)| v.range.value_at(d)).collect();
            done = true;
            for (d, &size) in digits.iter_mut().zip(&sizes).rev() {
                *d += 1;
                if *d < size {
                    done = false;
                    break;
                }
                *d = 0;
            }
            Some(Assignment::new(names.clone(), values))
        })
    }

    /// Number of complete endogenous assignments, saturating.
    pub fn endogenous_space(&self) -> u128 {
        self.endogenous
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.range.len() as u128))
    }

    /// Resolves the bare identifiers of an equation: variables stay references,
    /// symbols declared by some range become constants.
    pub(crate) fn resolve_symbols(&self, var: &str, e: &Expr) -> Result<Expr, ModelError> {
        e.try_map_refs(&mut |r: &VarRef| {
            let name = r.name();
            if self.lookup(name).is_some() {
                Ok(Expr::Ref(r.clone()))
            } else if matches!(r, VarRef::Prev(_)) && self.declares_symbol(name) {
                Ok(Expr::Const(Value::sym(name)))
            } else {
                Err(ModelError::UnknownVariable {
                    name: name.to_string(),
                    context: format!("equation of {var}"),
                })
            }
        })
    }
}

fn kind_word(kind: VarKind) -> &'static str {
    match kind {
        VarKind::Exogenous => "exogenous",
        VarKind::Endogenous => "endogenous",
    }
}

/// A complete assignment over an ordered set of variables.
#[derive(Clone, PartialEq, Eq)]
pub struct Assignment {
    names: Arc<[String]>,
    values: Vec<Value>,
}

impl std::hash::Hash for Assignment {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.values.hash(state);
    }
}

impl Assignment {
    pub fn new(names: Arc<[String]>, values: Vec<Value>) -> Self {
        assert_eq!(names.len(), values.len(), "assignment arity mismatch");
        Assignment { names, values }
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, Value)>) -> Self {
        let (names, values): (Vec<String>, Vec<Value>) =
            pairs.into_iter().map(|(n, v)| (n.as_ref().to_string(), v)).unzip();
        Assignment::new(names.into(), values)
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Value> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.position(name).map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Copy with `name` rebound; panics if `name` is not in the assignment.
    pub fn with(&self, name: &str, value: Value) -> Assignment {
        let mut out = self.clone();
        let i = self
            .position(name)
            .unwrap_or_else(|| panic!("{name} not in assignment"));
        out.values[i] = value;
        out
    }

    /// Restriction to `names` (in that order); `None` if a name is missing.
    pub fn project(&self, names: &Arc<[String]>) -> Option<Assignment> {
        let values = names.iter().map(|n| self.get(n).cloned()).collect::<Option<Vec<_>>>()?;
        Some(Assignment::new(names.clone(), values))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

/// Which flavour of reference an equation may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RefMode {
    OneStep,
    Delayed,
}

/// Resolves, lowers and type-checks the equations of a signature.
pub(crate) fn lower_equations(
    sig: &Signature,
    equations: Vec<(String, Expr)>,
    mode: RefMode,
) -> Result<(Vec<Expr>, Vec<Expr<Slot>>), ModelError> {
    let mut slots: Vec<Option<Expr>> = vec![None; sig.endogenous.len()];
    for (name, e) in equations {
        match sig.lookup(&name) {
            Some((VarKind::Endogenous, i)) => {
                if slots[i].is_some() {
                    return Err(ModelError::DuplicateName(name));
                }
                slots[i] = Some(sig.resolve_symbols(&name, &e)?);
            }
            Some((VarKind::Exogenous, _)) => return Err(ModelError::EquationForExogenous(name)),
            None => {
                return Err(ModelError::UnknownVariable {
                    context: "equation target".into(),
                    name,
                })
            }
        }
    }
    let mut sources = Vec::with_capacity(slots.len());
    let mut lowered = Vec::with_capacity(slots.len());
    for (var, e) in sig.endogenous.iter().zip(slots) {
        let e = e.ok_or_else(|| ModelError::MissingEquation(var.name.clone()))?;
        let low = e.try_map_refs(&mut |r: &VarRef| {
            let (kind, index) = sig.lookup(r.name()).expect("resolved above");
            let lag = match (r, mode) {
                (VarRef::Prev(_), RefMode::OneStep) => 1,
                (VarRef::Lag(_, t), RefMode::Delayed) => *t,
                (VarRef::Lag(n, t), RefMode::OneStep) => {
                    return Err(ModelError::BadReference {
                        var: var.name.clone(),
                        message: format!("lagged reference {n}[-{t}] in a one-step model"),
                    })
                }
                (VarRef::Prev(n), RefMode::Delayed) => {
                    return Err(ModelError::BadReference {
                        var: var.name.clone(),
                        message: format!("bare reference {n} in a delayed model; write {n}[-t]"),
                    })
                }
            };
            Ok(Expr::Ref(Slot { kind, index, lag }))
        })?;
        let ty = low.infer(sig).map_err(|message| ModelError::TypeError {
            var: var.name.clone(),
            message,
        })?;
        if !ty.comparable(var.range.ty()) {
            return Err(ModelError::TypeError {
                var: var.name.clone(),
                message: format!(
                    "equation has type {ty} but the range {} is {}",
                    var.range,
                    var.range.ty()
                ),
            });
        }
        sources.push(e);
        lowered.push(low);
    }
    Ok((sources, lowered))
}

/// A one-step temporal structural equation model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    signature: Signature,
    equations: Vec<Expr>,
    lowered: Vec<Expr<Slot>>,
}

impl Model {
    /// Validates the equations against the signature; exactly one equation
    /// per endogenous variable is required.
    pub fn new(signature: Signature, equations: Vec<(String, Expr)>) -> Result<Model, ModelError> {
        let (equations, lowered) = lower_equations(&signature, equations, RefMode::OneStep)?;
        Ok(Model {
            signature,
            equations,
            lowered,
        })
    }

    /// Parses equation bodies and validates them.
    pub fn from_sources<S: AsRef<str>>(
        signature: Signature,
        equations: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Model, ModelError> {
        let parsed = equations
            .into_iter()
            .map(|(name, src)| {
                let name = name.as_ref().to_string();
                Expr::parse(src.as_ref())
                    .map(|e| (name.clone(), e))
                    .map_err(|source| ModelError::Syntax { var: name, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Model::new(signature, parsed)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// Equation of the `i`-th endogenous variable.
    pub fn equation(&self, i: usize) -> &Expr {
        &self.equations[i]
    }

    pub fn equation_of(&self, name: &str) -> Option<&Expr> {
        match self.signature.lookup(name)? {
            (VarKind::Endogenous, i) => Some(&self.equations[i]),
            _ => None,
        }
    }

    /// One simultaneous call to all structural equations.
    pub fn step(&self, u_prev: &Assignment, v_prev: &Assignment) -> Result<Assignment, EvalError> {
        let values = self.step_values(u_prev.values(), v_prev.values(), &mut |_| None)?;
        Ok(Assignment::new(self.signature.endo_names.clone(), values))
    }

    /// Raw step over value slices. `pinned(i)` overrides the `i`-th output
    /// (used for interventions) without evaluating its equation.
    pub(crate) fn step_values(
        &self,
        u_prev: &[Value],
        v_prev: &[Value],
        pinned: &mut dyn FnMut(usize) -> Option<Value>,
    ) -> Result<Vec<Value>, EvalError> {
        let mut out = Vec::with_capacity(self.lowered.len());
        for (i, e) in self.lowered.iter().enumerate() {
            if let Some(v) = pinned(i) {
                out.push(v);
                continue;
            }
            let var = &self.signature.endogenous[i];
            let value = e
                .eval_with(&mut |s: &Slot| {
                    Ok(match s.kind {
                        VarKind::Exogenous => u_prev[s.index].clone(),
                        VarKind::Endogenous => v_prev[s.index].clone(),
                    })
                })
                .map_err(|err| err.in_equation(&var.name))?;
            if !var.range.contains(&value) {
                return Err(EvalError::OutOfRange {
                    var: var.name.clone(),
                    value,
                });
            }
            out.push(value);
        }
        Ok(out)
    }

    /// Extensional table of one equation over every argument tuple.
    /// Exponential in the signature; meant for small models.
    pub fn tabulate(&self, var: &str) -> Result<Vec<(Assignment, Assignment, Value)>, EvalError> {
        let i = match self.signature.lookup(var) {
            Some((VarKind::Endogenous, i)) => i,
            _ => return Err(EvalError::Unbound(var.to_string())),
        };
        let mut rows = Vec::new();
        for u in self.signature.all_assignments(VarKind::Exogenous) {
            for v in self.signature.all_assignments(VarKind::Endogenous) {
                let out = self.step(&u, &v)?;
                rows.push((u.clone(), v, out.values()[i].clone()));
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rocks() -> Model {
        let sig = Signature::new(
            vec![
                Variable::exogenous("U_ST", Range::binary()),
                Variable::exogenous("U_BT", Range::binary()),
            ],
            vec![
                Variable::endogenous("ST", Range::binary()),
                Variable::endogenous("BT", Range::binary()),
                Variable::endogenous("BS", Range::binary()),
            ],
        )
        .unwrap();
        Model::from_sources(sig, [("ST", "U_ST"), ("BT", "U_BT"), ("BS", "ST || BT")]).unwrap()
    }

    fn treatment() -> Model {
        let sig = Signature::new(
            vec![Variable::exogenous("U_T", Range::binary())],
            vec![
                Variable::endogenous("T", Range::binary()),
                Variable::endogenous(
                    "R",
                    Range::Values(vec![Value::Int(0), Value::sym("half"), Value::Int(1)]),
                ),
            ],
        )
        .unwrap();
        Model::from_sources(
            sig,
            [
                ("T", "U_T"),
                (
                    "R",
                    "if T = 0 && R != 1 then 0 else if T = 1 && R = 0 then half \
                     else if (T = 1 && R = half) || R = 1 then 1 else R",
                ),
            ],
        )
        .unwrap()
    }

    fn assign(m: &Model, kind: VarKind, values: &[i64]) -> Assignment {
        let vars = m.signature().vars(kind);
        m.signature()
            .assignment(
                kind,
                vars.iter().zip(values).map(|(v, &x)| (v.name.as_str(), Value::Int(x))),
            )
            .unwrap()
    }

    #[test]
    fn rocks_model_validates() {
        let m = rocks();
        assert_eq!(m.signature().endogenous().len(), 3);
        assert_eq!(m.equation_of("BS").unwrap().to_string(), "ST || BT");
    }

    #[test]
    fn duplicate_equation_is_rejected() {
        let sig = rocks().signature().clone();
        let err =
            Model::from_sources(sig, [("ST", "U_ST"), ("ST", "0"), ("BT", "U_BT"), ("BS", "ST || BT")]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateName("ST".into()));
    }

    #[test]
    fn undeclared_reference_is_rejected() {
        let sig = rocks().signature().clone();
        let err = Model::from_sources(sig, [("ST", "U_ST"), ("BT", "U_BT"), ("BS", "ST || Z")]).unwrap_err();
        assert!(
            matches!(err, ModelError::UnknownVariable { ref name, .. } if name == "Z"),
            "{err}"
        );
    }

    #[test]
    fn reserved_and_duplicate_names_are_rejected() {
        let err = Signature::new(vec![], vec![Variable::endogenous("G", Range::binary())]).unwrap_err();
        assert_eq!(err, ModelError::ReservedName("G".into()));
        let err = Signature::new(
            vec![Variable::exogenous("A", Range::binary())],
            vec![Variable::endogenous("A", Range::binary())],
        )
        .unwrap_err();
        assert_eq!(err, ModelError::DuplicateName("A".into()));
        let err = Signature::new(vec![], vec![Variable::endogenous("A", Range::interval(3, 2))]).unwrap_err();
        assert_eq!(err, ModelError::EmptyRange("A".into()));
        let err = Signature::new(vec![], vec![Variable::endogenous("A", Range::Values(vec![]))]).unwrap_err();
        assert_eq!(err, ModelError::EmptyRange("A".into()));
    }

    #[test]
    fn ill_typed_equations_are_rejected() {
        let sig = Signature::new(
            vec![],
            vec![
                Variable::endogenous("D", Range::symbols(&["Mon", "Tue"])),
                Variable::endogenous("N", Range::interval(0, 3)),
            ],
        )
        .unwrap();
        let err = Model::from_sources(sig.clone(), [("D", "D"), ("N", "D + 1")]).unwrap_err();
        assert!(
            matches!(err, ModelError::TypeError { ref var, .. } if var == "N"),
            "{err}"
        );
        let err = Model::from_sources(sig.clone(), [("D", "D"), ("N", "if D = 1 then 0 else 1")]).unwrap_err();
        assert!(matches!(err, ModelError::TypeError { .. }), "{err}");
        let err = Model::from_sources(sig, [("D", "N"), ("N", "N")]).unwrap_err();
        assert!(
            matches!(err, ModelError::TypeError { ref var, .. } if var == "D"),
            "{err}"
        );
    }

    #[test]
    fn rocks_step_reads_previous_values_only() {
        let m = rocks();
        let out = m
            .step(
                &assign(&m, VarKind::Exogenous, &[1, 0]),
                &assign(&m, VarKind::Endogenous, &[0, 0, 0]),
            )
            .unwrap();
        assert_eq!(out, assign(&m, VarKind::Endogenous, &[1, 0, 0]));
    }

    #[test]
    fn treatment_step_recovers_after_second_dose() {
        let m = treatment();
        let u = m
            .signature()
            .assignment(VarKind::Exogenous, [("U_T", Value::Int(0))])
            .unwrap();
        let v = m
            .signature()
            .assignment(VarKind::Endogenous, [("T", Value::Int(1)), ("R", Value::sym("half"))])
            .unwrap();
        let out = m.step(&u, &v).unwrap();
        assert_eq!(out.get("T"), Some(&Value::Int(0)));
        assert_eq!(out.get("R"), Some(&Value::Int(1)));
    }

    #[test]
    fn constant_model_ignores_inputs() {
        let sig = rocks().signature().clone();
        let m = Model::from_sources(sig.clone(), [("ST", "1"), ("BT", "0"), ("BS", "1")]).unwrap();
        for u in sig.all_assignments(VarKind::Exogenous) {
            for v in sig.all_assignments(VarKind::Endogenous) {
                assert_eq!(m.step(&u, &v).unwrap(), assign(&m, VarKind::Endogenous, &[1, 0, 1]));
            }
        }
    }

    #[test]
    fn out_of_range_result_is_an_error_not_a_wrap() {
        let sig = Signature::new(vec![], vec![Variable::endogenous("C", Range::interval(0, 2))]).unwrap();
        let m = Model::from_sources(sig, [("C", "C + 1")]).unwrap();
        let v = assign(&m, VarKind::Endogenous, &[2]);
        let u = Assignment::new(Arc::from(Vec::<String>::new()), vec![]);
        assert_eq!(
            m.step(&u, &v),
            Err(EvalError::OutOfRange {
                var: "C".into(),
                value: Value::Int(3)
            })
        );
    }

    #[test]
    fn all_assignments_enumerates_product() {
        let m = treatment();
        let all: Vec<_> = m.signature().all_assignments(VarKind::Endogenous).collect();
        assert_eq!(all.len(), 6);
        let distinct: HashSet<_> = all.iter().map(|a| a.to_string()).collect();
        assert_eq!(distinct.len(), 6);
        assert_eq!(m.signature().endogenous_space(), 6);
    }

    #[test]
    fn tabulation_of_disjunction() {
        let m = rocks();
        let rows = m.tabulate("BS").unwrap();
        assert_eq!(rows.len(), 4 * 8);
        for (_, v, out) in rows {
            let expected = (v.get("ST") == Some(&Value::Int(1))) || (v.get("BT") == Some(&Value::Int(1)));
            assert_eq!(out, Value::Int(expected as i64));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // changing inputs an equation does not mention leaves its output alone
            #[test]
            fn simultaneity(u in proptest::collection::vec(0i64..2, 2),
                            v in proptest::collection::vec(0i64..2, 3),
                            flip in 0usize..3) {
                let m = rocks();
                let ua = assign(&m, VarKind::Exogenous, &u);
                let va = assign(&m, VarKind::Endogenous, &v);
                let base = m.step(&ua, &va).unwrap();
                let mut v2 = v.clone();
                v2[flip] = 1 - v2[flip];
                let changed = m.step(&ua, &assign(&m, VarKind::Endogenous, &v2)).unwrap();
                let name = &m.signature().endogenous()[flip].name;
                for (i, var) in m.signature().endogenous().iter().enumerate() {
                    let mut mentions = false;
                    m.equation(i).for_each_ref(&mut |r: &VarRef| mentions |= r.name() == name);
                    if !mentions {
                        prop_assert_eq!(base.get(&var.name), changed.get(&var.name));
                    }
                }
                prop_assert_eq!(m.step(&ua, &va).unwrap(), base);
            }
        }
    }
}
