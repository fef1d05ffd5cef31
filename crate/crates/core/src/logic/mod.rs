//! PLTL and CPLTL formulas: syntax, parsing, printing and path model checking.

mod check;
mod parse;

use std::fmt;

use crate::engine::{EngineError, Intervention};
use crate::lexer::SyntaxError;
use crate::model::{is_identifier, Value};

pub use check::{check_cpltl, check_pltl, naive_check_pltl, reduce_position, CpltlChecker};
pub use parse::{parse_cpltl, parse_pltl};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown variable {0} in formula")]
    UnknownVariable(String),
    #[error("atom over exogenous variable {0}; atoms may only mention endogenous variables")]
    ExogenousAtom(String),
    #[error("{0} is exogenous and cannot be intervened on")]
    ExogenousIntervention(String),
    #[error("value {value} is outside the range of {var}")]
    OutOfRangeValue { var: String, value: Value },
    #[error("{var} is intervened on twice at time {time}")]
    DuplicateInterventionTime { var: String, time: usize },
    #[error("intervention at position {0} is nested inside another intervention")]
    NestedIntervention(usize),
    #[error("intervention at position {0} appears under a temporal operator")]
    InterventionUnderTemporal(usize),
    #[error("this formula contains interventions; use the CPLTL entry point")]
    UnexpectedIntervention,
    #[error("loop-back index {loop_back} is outside a trace of length {len}")]
    BadLoopBack { loop_back: usize, len: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// PLTL over atoms `X = x`. The derived modalities F, G, P and H are
/// represented by their expansions into U and S.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pltl {
    True,
    False,
    Atom { var: String, value: Value },
    Not(Box<Pltl>),
    And(Box<Pltl>, Box<Pltl>),
    Or(Box<Pltl>, Box<Pltl>),
    Implies(Box<Pltl>, Box<Pltl>),
    Next(Box<Pltl>),
    Until(Box<Pltl>, Box<Pltl>),
    Prev(Box<Pltl>),
    Since(Box<Pltl>, Box<Pltl>),
}

impl Pltl {
    pub fn atom(var: &str, value: impl Into<Value>) -> Pltl {
        Pltl::Atom {
            var: var.to_string(),
            value: value.into(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Pltl) -> Pltl {
        Pltl::Not(Box::new(f))
    }

    pub fn and(a: Pltl, b: Pltl) -> Pltl {
        Pltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Pltl, b: Pltl) -> Pltl {
        Pltl::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Pltl, b: Pltl) -> Pltl {
        Pltl::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: Pltl) -> Pltl {
        Pltl::Next(Box::new(f))
    }

    pub fn prev(f: Pltl) -> Pltl {
        Pltl::Prev(Box::new(f))
    }

    pub fn until(a: Pltl, b: Pltl) -> Pltl {
        Pltl::Until(Box::new(a), Box::new(b))
    }

    pub fn since(a: Pltl, b: Pltl) -> Pltl {
        Pltl::Since(Box::new(a), Box::new(b))
    }

    /// `F f`, stored as `true U f`.
    pub fn eventually(f: Pltl) -> Pltl {
        Pltl::until(Pltl::True, f)
    }

    /// `G f`, stored as `!(true U !f)`.
    pub fn always(f: Pltl) -> Pltl {
        Pltl::not(Pltl::eventually(Pltl::not(f)))
    }

    /// `P f`, stored as `true S f`.
    pub fn once(f: Pltl) -> Pltl {
        Pltl::since(Pltl::True, f)
    }

    /// `H f`, stored as `!(true S !f)`.
    pub fn historically(f: Pltl) -> Pltl {
        Pltl::not(Pltl::once(Pltl::not(f)))
    }

    pub fn next_n(n: usize, f: Pltl) -> Pltl {
        (0..n).fold(f, |f, _| Pltl::next(f))
    }

    pub fn prev_n(n: usize, f: Pltl) -> Pltl {
        (0..n).fold(f, |f, _| Pltl::prev(f))
    }

    pub fn children(&self) -> Vec<&Pltl> {
        match self {
            Pltl::True | Pltl::False | Pltl::Atom { .. } => vec![],
            Pltl::Not(a) | Pltl::Next(a) | Pltl::Prev(a) => vec![a],
            Pltl::And(a, b) | Pltl::Or(a, b) | Pltl::Implies(a, b) | Pltl::Until(a, b) | Pltl::Since(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Maximal nesting of past operators.
    pub fn past_height(&self) -> usize {
        let below = self.children().into_iter().map(Pltl::past_height).max().unwrap_or(0);
        match self {
            Pltl::Prev(_) | Pltl::Since(..) => below + 1,
            _ => below,
        }
    }

    /// Number of operator and atom nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Pltl::size).sum::<usize>()
    }

    pub fn for_each_atom(&self, f: &mut dyn FnMut(&str, &Value)) {
        if let Pltl::Atom { var, value } = self {
            f(var, value);
        }
        for c in self.children() {
            c.for_each_atom(f);
        }
    }
}

/// Boolean combinations of intervened PLTL formulas.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cpltl {
    Intervened(Intervention, Pltl),
    Not(Box<Cpltl>),
    And(Box<Cpltl>, Box<Cpltl>),
    Or(Box<Cpltl>, Box<Cpltl>),
}

impl Cpltl {
    /// A PLTL formula under the empty intervention.
    pub fn plain(f: Pltl) -> Cpltl {
        Cpltl::Intervened(Intervention::empty(), f)
    }

    pub fn interventions(&self) -> Vec<&Intervention> {
        match self {
            Cpltl::Intervened(i, _) => vec![i],
            Cpltl::Not(a) => a.interventions(),
            Cpltl::And(a, b) | Cpltl::Or(a, b) => {
                let mut v = a.interventions();
                v.extend(b.interventions());
                v
            }
        }
    }
}

// Printing precedences; higher binds tighter.
const P_IMPLIES: u8 = 0;
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_BINTEMP: u8 = 3;
const P_UNARY: u8 = 4;
const P_ATOM: u8 = 5;

fn fmt_value(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::Sym(s) if !is_identifier(s) => write!(f, "'{s}'"),
        v => write!(f, "{v}"),
    }
}

fn strip_not(f: &Pltl) -> Option<&Pltl> {
    match f {
        Pltl::Not(a) => Some(a),
        _ => None,
    }
}

/// Recognizes the expansions of F, G, P and H.
fn sugar(f: &Pltl) -> Option<(&'static str, &Pltl)> {
    match f {
        Pltl::Until(a, b) if **a == Pltl::True => Some(("F", b)),
        Pltl::Since(a, b) if **a == Pltl::True => Some(("P", b)),
        Pltl::Not(inner) => match &**inner {
            Pltl::Until(a, b) if **a == Pltl::True => strip_not(b).map(|g| ("G", g)),
            Pltl::Since(a, b) if **a == Pltl::True => strip_not(b).map(|h| ("H", h)),
            _ => None,
        },
        _ => None,
    }
}

fn prec(f: &Pltl) -> u8 {
    if sugar(f).is_some() {
        return P_UNARY;
    }
    match f {
        Pltl::True | Pltl::False | Pltl::Atom { .. } => P_ATOM,
        Pltl::Not(_) | Pltl::Next(_) | Pltl::Prev(_) => P_UNARY,
        Pltl::Until(..) | Pltl::Since(..) => P_BINTEMP,
        Pltl::And(..) => P_AND,
        Pltl::Or(..) => P_OR,
        Pltl::Implies(..) => P_IMPLIES,
    }
}

fn fmt_pltl(out: &mut fmt::Formatter<'_>, f: &Pltl, min: u8) -> fmt::Result {
    if prec(f) < min {
        out.write_str("(")?;
        fmt_pltl(out, f, 0)?;
        return out.write_str(")");
    }
    if let Some((op, body)) = sugar(f) {
        write!(out, "{op} ")?;
        return fmt_pltl(out, body, P_UNARY);
    }
    match f {
        Pltl::True => out.write_str("true"),
        Pltl::False => out.write_str("false"),
        Pltl::Atom { var, value } => {
            write!(out, "{var}=")?;
            fmt_value(out, value)
        }
        Pltl::Not(a) => {
            out.write_str("!")?;
            fmt_pltl(out, a, P_UNARY)
        }
        Pltl::Next(_) | Pltl::Prev(_) => {
            let (op, mut n, mut body) = match f {
                Pltl::Next(a) => ("X", 1, &**a),
                Pltl::Prev(a) => ("Y", 1, &**a),
                _ => unreachable!(),
            };
            loop {
                match (op, body) {
                    ("X", Pltl::Next(a)) | ("Y", Pltl::Prev(a)) if sugar(body).is_none() => {
                        n += 1;
                        body = a;
                    }
                    _ => break,
                }
            }
            if n == 1 {
                write!(out, "{op} ")?;
            } else {
                write!(out, "{op}^{n} ")?;
            }
            fmt_pltl(out, body, P_UNARY)
        }
        Pltl::Until(a, b) | Pltl::Since(a, b) => {
            let op = if matches!(f, Pltl::Until(..)) { "U" } else { "S" };
            fmt_pltl(out, a, P_UNARY)?;
            write!(out, " {op} ")?;
            fmt_pltl(out, b, P_BINTEMP)
        }
        Pltl::And(a, b) => {
            fmt_pltl(out, a, P_AND)?;
            out.write_str(" && ")?;
            fmt_pltl(out, b, P_AND + 1)
        }
        Pltl::Or(a, b) => {
            fmt_pltl(out, a, P_OR)?;
            out.write_str(" || ")?;
            fmt_pltl(out, b, P_OR + 1)
        }
        Pltl::Implies(a, b) => {
            fmt_pltl(out, a, P_IMPLIES + 1)?;
            out.write_str(" -> ")?;
            fmt_pltl(out, b, P_IMPLIES)
        }
    }
}

impl fmt::Display for Pltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_pltl(f, self, 0)
    }
}

fn cprec(f: &Cpltl) -> u8 {
    match f {
        Cpltl::Intervened(i, body) if i.is_empty() => prec(body),
        Cpltl::Intervened(..) => P_BINTEMP,
        Cpltl::Not(_) => P_UNARY,
        Cpltl::And(..) => P_AND,
        Cpltl::Or(..) => P_OR,
    }
}

fn fmt_cpltl(out: &mut fmt::Formatter<'_>, f: &Cpltl, min: u8) -> fmt::Result {
    if cprec(f) < min {
        out.write_str("(")?;
        fmt_cpltl(out, f, 0)?;
        return out.write_str(")");
    }
    match f {
        Cpltl::Intervened(i, body) if i.is_empty() => fmt_pltl(out, body, min),
        Cpltl::Intervened(i, body) => {
            write!(out, "[{i}] ")?;
            fmt_pltl(out, body, P_BINTEMP)
        }
        Cpltl::Not(a) => {
            out.write_str("!")?;
            // `!` followed by `[` is not in the grammar
            fmt_cpltl(out, a, P_ATOM)
        }
        Cpltl::And(a, b) => {
            fmt_cpltl(out, a, P_AND)?;
            out.write_str(" && ")?;
            fmt_cpltl(out, b, P_AND + 1)
        }
        Cpltl::Or(a, b) => {
            fmt_cpltl(out, a, P_OR)?;
            out.write_str(" || ")?;
            fmt_cpltl(out, b, P_OR + 1)
        }
    }
}

impl fmt::Display for Cpltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cpltl(f, self, 0)
    }
}
