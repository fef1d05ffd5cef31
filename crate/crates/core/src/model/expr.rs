//! Structural-equation expression language.
//!
//! Expressions are parsed into `Expr<VarRef>` (names), and lowered into
//! `Expr<Slot>` (indices into the signature) once a model validates them.
//! Truth values are the integers 0 and 1, so `ST || BT` is a valid equation
//! for a `{0, 1}`-ranged variable.

use std::fmt;

use super::{Signature, Ty, Value, VarKind};
use crate::lexer::{Cursor, SyntaxError, Tok};

/// A variable reference as written in an equation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VarRef {
    /// Value of the variable at the previous step.
    Prev(String),
    /// Value of the variable `lag` steps back (delayed models only).
    Lag(String, u32),
}

impl VarRef {
    pub fn name(&self) -> &str {
        match self {
            VarRef::Prev(n) | VarRef::Lag(n, _) => n,
        }
    }
}

/// A reference resolved against a signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub kind: VarKind,
    pub index: usize,
    /// 1 for one-step references.
    pub lag: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Eq,
    Neq,
    Lt,
    Le,
    Add,
    Sub,
    Mul,
    Mod,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Mod => "mod",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Mod => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr<R = VarRef> {
    Const(Value),
    Ref(R),
    Not(Box<Expr<R>>),
    Bin(BinOp, Box<Expr<R>>, Box<Expr<R>>),
    Ite(Box<Expr<R>>, Box<Expr<R>>, Box<Expr<R>>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("equation of {var} produced {value}, which is outside its range")]
    OutOfRange { var: String, value: Value },
    #[error("division by zero in `mod`")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("type error: {0}")]
    Type(String),
    #[error("variable {0} is not bound in the environment")]
    Unbound(String),
    #[error("in equation of {var}: {source}")]
    InEquation {
        var: String,
        #[source]
        source: Box<EvalError>,
    },
    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<EvalError>,
    },
}

impl EvalError {
    pub fn in_equation(self, var: &str) -> Self {
        match self {
            e @ EvalError::OutOfRange { .. } => e,
            e => EvalError::InEquation {
                var: var.to_string(),
                source: Box::new(e),
            },
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        EvalError::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

fn as_bool(v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Int(0) => Ok(false),
        Value::Int(1) => Ok(true),
        other => Err(EvalError::Type(format!("expected a truth value 0/1, got {other}"))),
    }
}

fn as_int(v: &Value) -> Result<i64, EvalError> {
    match v {
        Value::Int(n) => Ok(*n),
        other => Err(EvalError::Type(format!("expected an integer, got {other}"))),
    }
}

fn truth(b: bool) -> Value {
    Value::Int(b as i64)
}

impl<R> Expr<R> {
    /// Evaluates the expression, resolving references through `lookup`.
    pub fn eval_with<F>(&self, lookup: &mut F) -> Result<Value, EvalError>
    where
        F: FnMut(&R) -> Result<Value, EvalError>,
    {
        Ok(match self {
            Expr::Const(v) => v.clone(),
            Expr::Ref(r) => lookup(r)?,
            Expr::Not(e) => truth(!as_bool(&e.eval_with(lookup)?)?),
            Expr::Ite(c, t, e) => {
                if as_bool(&c.eval_with(lookup)?)? {
                    t.eval_with(lookup)?
                } else {
                    e.eval_with(lookup)?
                }
            }
            Expr::Bin(op, a, b) => {
                match op {
                    BinOp::And => {
                        return Ok(truth(
                            as_bool(&a.eval_with(lookup)?)? && as_bool(&b.eval_with(lookup)?)?,
                        ))
                    }
                    BinOp::Or => {
                        return Ok(truth(
                            as_bool(&a.eval_with(lookup)?)? || as_bool(&b.eval_with(lookup)?)?,
                        ))
                    }
                    _ => {}
                }
                let x = a.eval_with(lookup)?;
                let y = b.eval_with(lookup)?;
                match op {
                    BinOp::Eq => truth(x == y),
                    BinOp::Neq => truth(x != y),
                    BinOp::Lt => truth(as_int(&x)? < as_int(&y)?),
                    BinOp::Le => truth(as_int(&x)? <= as_int(&y)?),
                    BinOp::Add => Value::Int(as_int(&x)?.checked_add(as_int(&y)?).ok_or(EvalError::Overflow)?),
                    BinOp::Sub => Value::Int(as_int(&x)?.checked_sub(as_int(&y)?).ok_or(EvalError::Overflow)?),
                    BinOp::Mul => Value::Int(as_int(&x)?.checked_mul(as_int(&y)?).ok_or(EvalError::Overflow)?),
                    BinOp::Mod => {
                        let d = as_int(&y)?;
                        if d == 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        Value::Int(as_int(&x)?.rem_euclid(d))
                    }
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        })
    }

    pub fn try_map_refs<S, E>(&self, f: &mut impl FnMut(&R) -> Result<Expr<S>, E>) -> Result<Expr<S>, E> {
        Ok(match self {
            Expr::Const(v) => Expr::Const(v.clone()),
            Expr::Ref(r) => f(r)?,
            Expr::Not(e) => Expr::Not(Box::new(e.try_map_refs(f)?)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.try_map_refs(f)?), Box::new(b.try_map_refs(f)?)),
            Expr::Ite(c, t, e) => Expr::Ite(
                Box::new(c.try_map_refs(f)?),
                Box::new(t.try_map_refs(f)?),
                Box::new(e.try_map_refs(f)?),
            ),
        })
    }

    pub fn for_each_ref(&self, f: &mut impl FnMut(&R)) {
        match self {
            Expr::Const(_) => {}
            Expr::Ref(r) => f(r),
            Expr::Not(e) => e.for_each_ref(f),
            Expr::Bin(_, a, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Expr::Ite(c, t, e) => {
                c.for_each_ref(f);
                t.for_each_ref(f);
                e.for_each_ref(f);
            }
        }
    }
}

/// Evaluates a one-step expression against an environment binding variables by name.
pub fn eval_expr(e: &Expr, env: &super::Assignment) -> Result<Value, EvalError> {
    e.eval_with(&mut |r: &VarRef| match r {
        VarRef::Prev(n) => env.get(n).cloned().ok_or_else(|| EvalError::Unbound(n.clone())),
        VarRef::Lag(n, t) => Err(EvalError::Type(format!(
            "lagged reference {n}[-{t}] outside a delayed model"
        ))),
    })
}

// ---------------------------------------------------------------------------
// Type inference

impl Expr<Slot> {
    pub(crate) fn infer(&self, sig: &Signature) -> Result<Ty, String> {
        let need_int = |t: Ty, what: &dyn Fn() -> String| -> Result<(), String> {
            if t.is_int() {
                Ok(())
            } else {
                Err(format!("{} needs integer operands, found {t}", what()))
            }
        };
        Ok(match self {
            Expr::Const(v) => Ty::of_value(v),
            Expr::Ref(s) => sig.var(s.kind, s.index).range.ty(),
            Expr::Not(e) => {
                need_int(e.infer(sig)?, &|| "`!`".into())?;
                Ty::Int
            }
            Expr::Ite(c, t, e) => {
                need_int(c.infer(sig)?, &|| "`if` condition".into())?;
                t.infer(sig)?.join(e.infer(sig)?)
            }
            Expr::Bin(op, a, b) => {
                let (ta, tb) = (a.infer(sig)?, b.infer(sig)?);
                match op {
                    BinOp::Eq | BinOp::Neq => {
                        if !ta.comparable(tb) {
                            return Err(format!(
                                "`{}` compares incompatible operands ({ta} and {tb})",
                                op.symbol()
                            ));
                        }
                    }
                    _ => {
                        let what = || format!("`{}`", op.symbol());
                        need_int(ta, &what)?;
                        need_int(tb, &what)?;
                    }
                }
                Ty::Int
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Parsing

const EXPR_KEYWORDS: &[&str] = &["if", "then", "else", "mod", "true", "false"];

impl Expr {
    /// Parses an equation body. Bare identifiers become `VarRef::Prev`; whether
    /// they denote a variable or a symbolic constant is decided when the
    /// equation is attached to a signature.
    pub fn parse(src: &str) -> Result<Expr, SyntaxError> {
        let mut cur = Cursor::new(src)?;
        let e = parse_expr(&mut cur)?;
        cur.expect_end()?;
        Ok(e)
    }
}

fn parse_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    if cur.is_keyword("if") {
        cur.bump();
        let c = parse_expr(cur)?;
        cur.expect_keyword("then")?;
        let t = parse_expr(cur)?;
        cur.expect_keyword("else")?;
        let e = parse_expr(cur)?;
        return Ok(Expr::Ite(Box::new(c), Box::new(t), Box::new(e)));
    }
    parse_or(cur)
}

fn parse_or(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_and(cur)?;
    while cur.eat(&Tok::OrOr) {
        let rhs = parse_and(cur)?;
        lhs = Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_cmp(cur)?;
    while cur.eat(&Tok::AndAnd) {
        let rhs = parse_cmp(cur)?;
        lhs = Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_cmp(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let lhs = parse_add(cur)?;
    let (op, swap) = match cur.peek() {
        Tok::Eq => (BinOp::Eq, false),
        Tok::Neq => (BinOp::Neq, false),
        Tok::Lt => (BinOp::Lt, false),
        Tok::Le => (BinOp::Le, false),
        Tok::Gt => (BinOp::Lt, true),
        Tok::Ge => (BinOp::Le, true),
        _ => return Ok(lhs),
    };
    cur.bump();
    let rhs = parse_add(cur)?;
    Ok(if swap {
        Expr::Bin(op, Box::new(rhs), Box::new(lhs))
    } else {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    })
}

fn parse_add(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_mul(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => return Ok(lhs),
        };
        cur.bump();
        let rhs = parse_mul(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_mul(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_unary(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Star => BinOp::Mul,
            Tok::Ident(s) if s == "mod" => BinOp::Mod,
            _ => return Ok(lhs),
        };
        cur.bump();
        let rhs = parse_unary(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    match cur.peek() {
        Tok::Bang => {
            cur.bump();
            Ok(Expr::Not(Box::new(parse_unary(cur)?)))
        }
        Tok::Minus => {
            cur.bump();
            if let Tok::Int(n) = *cur.peek() {
                cur.bump();
                return Ok(Expr::Const(Value::Int(-n)));
            }
            let e = parse_unary(cur)?;
            Ok(Expr::Bin(BinOp::Sub, Box::new(Expr::Const(Value::Int(0))), Box::new(e)))
        }
        _ => parse_atom(cur),
    }
}

fn parse_atom(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let at = cur.offset();
    match cur.bump() {
        Tok::Int(n) => Ok(Expr::Const(Value::Int(n))),
        Tok::Hash => Ok(Expr::Const(Value::Undefined)),
        Tok::Str(s) => Ok(Expr::Const(Value::sym(&s))),
        Tok::LParen => {
            let e = parse_expr(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(e)
        }
        Tok::Ident(s) if s == "true" => Ok(Expr::Const(Value::Int(1))),
        Tok::Ident(s) if s == "false" => Ok(Expr::Const(Value::Int(0))),
        Tok::Ident(s) if EXPR_KEYWORDS.contains(&s.as_str()) => {
            Err(SyntaxError::new(at, format!("unexpected keyword `{s}`")))
        }
        Tok::Ident(s) => {
            if *cur.peek() == Tok::LBracket && *cur.peek_at(1) == Tok::Minus {
                cur.bump();
                cur.bump();
                let lag_at = cur.offset();
                let lag = match cur.bump() {
                    Tok::Int(n) if n >= 1 && n <= u32::MAX as i64 => n as u32,
                    _ => return Err(SyntaxError::new(lag_at, "expected a positive lag")),
                };
                cur.expect(&Tok::RBracket)?;
                Ok(Expr::Ref(VarRef::Lag(s, lag)))
            } else {
                Ok(Expr::Ref(VarRef::Prev(s)))
            }
        }
        t => Err(SyntaxError::new(at, format!("expected an expression, found {t}"))),
    }
}

// ---------------------------------------------------------------------------
// Printing

fn expr_prec<R>(e: &Expr<R>) -> u8 {
    match e {
        Expr::Ite(..) => 0,
        Expr::Bin(op, ..) => op.precedence(),
        Expr::Not(_) => 6,
        Expr::Const(Value::Int(n)) if *n < 0 => 6,
        Expr::Const(_) | Expr::Ref(_) => 7,
    }
}

struct Child<'a, R>(&'a Expr<R>, u8);

impl<R: fmt::Display> fmt::Display for Child<'_, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if expr_prec(self.0) < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Prev(n) => f.write_str(n),
            VarRef::Lag(n, t) => write!(f, "{n}[-{t}]"),
        }
    }
}

impl<R: fmt::Display> fmt::Display for Expr<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(Value::Sym(s)) => write!(f, "'{s}'"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Not(e) => write!(f, "!{}", Child(e, 6)),
            Expr::Ite(c, t, e) => write!(f, "if {c} then {t} else {e}"),
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                // comparisons do not chain; the other levels are left-associative
                let (lp, rp) = if p == 3 { (p + 1, p + 1) } else { (p, p + 1) };
                write!(f, "{} {} {}", Child(a, lp), op.symbol(), Child(b, rp))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Assignment;

    fn env(pairs: &[(&str, Value)]) -> Assignment {
        Assignment::new(
            pairs.iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>().into(),
            pairs.iter().map(|(_, v)| v.clone()).collect(),
        )
    }

    #[test]
    fn treatment_recovery_equation() {
        let e = Expr::parse(
            "if T = 0 && R != 1 then 0 else if T = 1 && R = 0 then 'half' \
             else if (T = 1 && R = 'half') || R = 1 then 1 else R",
        )
        .unwrap();
        let v = eval_expr(&e, &env(&[("T", Value::Int(1)), ("R", Value::sym("half"))])).unwrap();
        assert_eq!(v, Value::Int(1));
        let v = eval_expr(&e, &env(&[("T", Value::Int(0)), ("R", Value::sym("half"))])).unwrap();
        assert_eq!(v, Value::Int(0));
    }

    #[test]
    fn constant_ignores_environment() {
        let e = Expr::parse("0").unwrap();
        assert_eq!(eval_expr(&e, &env(&[("A", Value::Int(7))])).unwrap(), Value::Int(0));
        assert_eq!(eval_expr(&e, &env(&[])).unwrap(), Value::Int(0));
    }

    #[test]
    fn modular_counter_wraps_on_every_minute() {
        let e = Expr::parse("(M + 1) mod 60").unwrap();
        // exhaustive over the counter's range
        for m in 0..60 {
            let got = eval_expr(&e, &env(&[("M", Value::Int(m))])).unwrap();
            let expected = if m == 59 { 0 } else { m + 1 };
            assert_eq!(got, Value::Int(expected));
        }
    }

    #[test]
    fn mod_zero_is_an_error() {
        let e = Expr::parse("M mod 0").unwrap();
        assert_eq!(
            eval_expr(&e, &env(&[("M", Value::Int(3))])),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn lag_references_and_undefined_marker_parse() {
        let e = Expr::parse("if Z[-3] != # then Z[-3] + 1 else Y").unwrap();
        assert_eq!(
            e,
            Expr::Ite(
                Box::new(Expr::Bin(
                    BinOp::Neq,
                    Box::new(Expr::Ref(VarRef::Lag("Z".into(), 3))),
                    Box::new(Expr::Const(Value::Undefined))
                )),
                Box::new(Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::Ref(VarRef::Lag("Z".into(), 3))),
                    Box::new(Expr::Const(Value::Int(1)))
                )),
                Box::new(Expr::Ref(VarRef::Prev("Y".into()))),
            )
        );
    }

    #[test]
    fn printer_output_reparses_to_same_tree() {
        for src in [
            "a - (b - c)",
            "(a - b) - c",
            "!(a = 1) || b = 2 && c < 3",
            "if a = 1 then (b + 1) mod 4 else -2",
            "x[-2] * (y + 3) = 'sym'",
            "(a || b) && c",
            "a = (b = 1)",
        ] {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(Expr::parse(&printed).unwrap(), e, "{src} printed as {printed}");
        }
    }

    #[test]
    fn greater_than_is_sugar_for_swapped_less_than() {
        assert_eq!(Expr::parse("a > 1").unwrap(), Expr::parse("1 < a").unwrap());
        assert_eq!(Expr::parse("a >= 1").unwrap(), Expr::parse("1 <= a").unwrap());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = Expr::parse("if a then b").unwrap_err();
        assert_eq!(err.position, 11);
        assert!(Expr::parse("a[-0]").is_err());
        assert!(Expr::parse("mod").is_err());
    }
}
