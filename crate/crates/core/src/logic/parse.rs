//! Recursive-descent parser for the formula grammar.
//!
//! ```text
//! formula := or ('->' formula)?
//! or      := and ('||' and)*
//! and     := interv ('&&' interv)*
//! interv  := '[' entries? ']' interv | binary
//! binary  := unary (('U' | 'S') binary)?
//! unary   := '!' unary | ('X' | 'Y') ('^' INT)? unary | ('F' | 'G' | 'P' | 'H') unary | primary
//! primary := 'true' | 'false' | '(' formula ')' | NAME ('=' | '!=') value
//! ```

use super::{Cpltl, LogicError, Pltl};
use crate::engine::{parse_value, Intervention, InterventionError};
use crate::lexer::{Cursor, Tok};
use crate::model::{Signature, Value, VarKind};

/// Parse tree before interventions are hoisted into CPLTL structure.
enum Raw {
    Pltl(Pltl),
    Not(Box<Raw>),
    And(Box<Raw>, Box<Raw>),
    Or(Box<Raw>, Box<Raw>),
    Implies(Box<Raw>, Box<Raw>),
    Next(Box<Raw>),
    Prev(Box<Raw>),
    Until(Box<Raw>, Box<Raw>),
    Since(Box<Raw>, Box<Raw>),
    Intervene(usize, Intervention, Box<Raw>),
}

impl Raw {
    /// Offset of the first intervention inside, if any.
    fn first_intervention(&self) -> Option<usize> {
        match self {
            Raw::Pltl(_) => None,
            Raw::Intervene(pos, ..) => Some(*pos),
            Raw::Not(a) | Raw::Next(a) | Raw::Prev(a) => a.first_intervention(),
            Raw::And(a, b) | Raw::Or(a, b) | Raw::Implies(a, b) | Raw::Until(a, b) | Raw::Since(a, b) => {
                a.first_intervention().or_else(|| b.first_intervention())
            }
        }
    }

    /// Conversion of an intervention-free tree.
    fn into_pltl(self) -> Pltl {
        let b = |r: Box<Raw>| Box::new(r.into_pltl());
        match self {
            Raw::Pltl(f) => f,
            Raw::Not(a) => Pltl::Not(b(a)),
            Raw::And(x, y) => Pltl::And(b(x), b(y)),
            Raw::Or(x, y) => Pltl::Or(b(x), b(y)),
            Raw::Implies(x, y) => Pltl::Implies(b(x), b(y)),
            Raw::Next(a) => Pltl::Next(b(a)),
            Raw::Prev(a) => Pltl::Prev(b(a)),
            Raw::Until(x, y) => Pltl::Until(b(x), b(y)),
            Raw::Since(x, y) => Pltl::Since(b(x), b(y)),
            Raw::Intervene(..) => unreachable!("checked by the caller"),
        }
    }

    fn into_cpltl(self) -> Result<Cpltl, LogicError> {
        if self.first_intervention().is_none() {
            return Ok(Cpltl::plain(self.into_pltl()));
        }
        match self {
            Raw::Intervene(_, int, body) => match body.first_intervention() {
                Some(pos) => Err(LogicError::NestedIntervention(pos)),
                None => Ok(Cpltl::Intervened(int, body.into_pltl())),
            },
            Raw::Not(a) => Ok(Cpltl::Not(Box::new(a.into_cpltl()?))),
            Raw::And(a, b) => Ok(Cpltl::And(Box::new(a.into_cpltl()?), Box::new(b.into_cpltl()?))),
            Raw::Or(a, b) => Ok(Cpltl::Or(Box::new(a.into_cpltl()?), Box::new(b.into_cpltl()?))),
            Raw::Implies(a, b) => Ok(Cpltl::Or(
                Box::new(Cpltl::Not(Box::new(a.into_cpltl()?))),
                Box::new(b.into_cpltl()?),
            )),
            temporal => Err(LogicError::InterventionUnderTemporal(
                temporal.first_intervention().expect("has an intervention"),
            )),
        }
    }
}

struct Parser<'s> {
    cur: Cursor,
    sig: &'s Signature,
}

fn boxed(r: Raw) -> Box<Raw> {
    Box::new(r)
}

fn map_intervention_error(e: InterventionError) -> LogicError {
    match e {
        InterventionError::Syntax(s) => LogicError::Syntax(s),
        InterventionError::UnknownVariable(v) => LogicError::UnknownVariable(v),
        InterventionError::Exogenous(v) => LogicError::ExogenousIntervention(v),
        InterventionError::OutOfRange { var, value } => LogicError::OutOfRangeValue { var, value },
        InterventionError::DuplicateTime { var, time } => LogicError::DuplicateInterventionTime { var, time },
    }
}

impl Parser<'_> {
    fn formula(&mut self) -> Result<Raw, LogicError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Raw::Implies(boxed(lhs), boxed(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Raw, LogicError> {
        let mut lhs = self.and()?;
        while self.cur.eat(&Tok::OrOr) {
            lhs = Raw::Or(boxed(lhs), boxed(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Raw, LogicError> {
        let mut lhs = self.interv()?;
        while self.cur.eat(&Tok::AndAnd) {
            lhs = Raw::And(boxed(lhs), boxed(self.interv()?));
        }
        Ok(lhs)
    }

    fn interv(&mut self) -> Result<Raw, LogicError> {
        if *self.cur.peek() != Tok::LBracket {
            return self.binary();
        }
        let pos = self.cur.offset();
        self.cur.bump();
        let int = if *self.cur.peek() == Tok::RBracket {
            Intervention::empty()
        } else {
            Intervention::parse_entries(&mut self.cur).map_err(map_intervention_error)?
        };
        self.cur.expect(&Tok::RBracket)?;
        int.check(self.sig).map_err(map_intervention_error)?;
        let body = self.interv()?;
        Ok(Raw::Intervene(pos, int, boxed(body)))
    }

    fn binary(&mut self) -> Result<Raw, LogicError> {
        let lhs = self.unary()?;
        if self.cur.is_keyword("U") {
            self.cur.bump();
            return Ok(Raw::Until(boxed(lhs), boxed(self.binary()?)));
        }
        if self.cur.is_keyword("S") {
            self.cur.bump();
            return Ok(Raw::Since(boxed(lhs), boxed(self.binary()?)));
        }
        Ok(lhs)
    }

    fn repeat_count(&mut self) -> Result<usize, LogicError> {
        if !self.cur.eat(&Tok::Caret) {
            return Ok(1);
        }
        match *self.cur.peek() {
            Tok::Int(n) if n >= 1 => {
                self.cur.bump();
                Ok(n as usize)
            }
            _ => Err(self.cur.unexpected("a positive repetition count").into()),
        }
    }

    fn unary(&mut self) -> Result<Raw, LogicError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(Raw::Not(boxed(self.unary()?)));
        }
        let kw = match self.cur.peek() {
            Tok::Ident(s) if matches!(s.as_str(), "X" | "Y" | "F" | "G" | "P" | "H") => s.clone(),
            _ => return self.primary(),
        };
        self.cur.bump();
        match kw.as_str() {
            "X" | "Y" => {
                let n = self.repeat_count()?;
                let mut f = self.unary()?;
                for _ in 0..n {
                    f = if kw == "X" {
                        Raw::Next(boxed(f))
                    } else {
                        Raw::Prev(boxed(f))
                    };
                }
                Ok(f)
            }
            _ => {
                let body = self.unary()?;
                let t = || boxed(Raw::Pltl(Pltl::True));
                Ok(match kw.as_str() {
                    "F" => Raw::Until(t(), boxed(body)),
                    "P" => Raw::Since(t(), boxed(body)),
                    "G" => Raw::Not(boxed(Raw::Until(t(), boxed(Raw::Not(boxed(body)))))),
                    _ => Raw::Not(boxed(Raw::Since(t(), boxed(Raw::Not(boxed(body)))))),
                })
            }
        }
    }

    fn primary(&mut self) -> Result<Raw, LogicError> {
        match self.cur.peek().clone() {
            Tok::LParen => {
                self.cur.bump();
                let f = self.formula()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.cur.bump();
                Ok(Raw::Pltl(Pltl::True))
            }
            Tok::Ident(s) if s == "false" => {
                self.cur.bump();
                Ok(Raw::Pltl(Pltl::False))
            }
            Tok::Ident(name) if !matches!(name.as_str(), "U" | "S") => {
                self.cur.bump();
                let negated = match self.cur.peek() {
                    Tok::Eq => false,
                    Tok::Neq => true,
                    _ => {
                        return Err(self
                            .cur
                            .unexpected("`=` or `!=` (atoms have the form name=value)")
                            .into())
                    }
                };
                self.cur.bump();
                let value = parse_value(&mut self.cur)?;
                self.check_atom(&name, &value)?;
                let atom = Pltl::Atom { var: name, value };
                Ok(Raw::Pltl(if negated { Pltl::not(atom) } else { atom }))
            }
            _ => Err(self.cur.unexpected("a formula").into()),
        }
    }

    fn check_atom(&self, name: &str, value: &Value) -> Result<(), LogicError> {
        match self.sig.lookup(name) {
            None => Err(LogicError::UnknownVariable(name.to_string())),
            Some((VarKind::Exogenous, _)) => Err(LogicError::ExogenousAtom(name.to_string())),
            Some((VarKind::Endogenous, i)) => {
                if self.sig.endogenous()[i].range.contains(value) {
                    Ok(())
                } else {
                    Err(LogicError::OutOfRangeValue {
                        var: name.to_string(),
                        value: value.clone(),
                    })
                }
            }
        }
    }
}

fn parse_raw(text: &str, sig: &Signature) -> Result<Raw, LogicError> {
    let mut p = Parser {
        cur: Cursor::new(text)?,
        sig,
    };
    let f = p.formula()?;
    p.cur.expect_end()?;
    Ok(f)
}

/// Parses a CPLTL formula and resolves its atoms and interventions.
pub fn parse_cpltl(text: &str, sig: &Signature) -> Result<Cpltl, LogicError> {
    parse_raw(text, sig)?.into_cpltl()
}

/// Parses an intervention-free PLTL formula.
pub fn parse_pltl(text: &str, sig: &Signature) -> Result<Pltl, LogicError> {
    let raw = parse_raw(text, sig)?;
    if raw.first_intervention().is_some() {
        return Err(LogicError::UnexpectedIntervention);
    }
    Ok(raw.into_pltl())
}
