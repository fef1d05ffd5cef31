//! Ultimately periodic sequences of assignments and finite traces.

use std::fmt;
use std::sync::Arc;

use crate::model::{Assignment, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("the loop of a periodic sequence must be non-empty")]
    EmptyLoop,
    #[error("a trace must contain at least one state")]
    EmptyTrace,
    #[error("all assignments of a sequence must range over the same variables")]
    MixedVariables,
    #[error("observable {0} is not a variable of both sequences")]
    UnknownObservable(String),
    #[error("rescaling factor must be at least 1")]
    ZeroFactor,
}

/// `prefix · loop^ω`. The loop is never empty.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PeriodicSeq {
    prefix: Vec<Assignment>,
    cycle: Vec<Assignment>,
}

fn uniform<'a>(mut it: impl Iterator<Item = &'a Assignment>) -> bool {
    match it.next() {
        None => true,
        Some(first) => it.all(|a| a.names() == first.names()),
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl PeriodicSeq {
    pub fn new(prefix: Vec<Assignment>, cycle: Vec<Assignment>) -> Result<Self, TraceError> {
        if cycle.is_empty() {
            return Err(TraceError::EmptyLoop);
        }
        if !uniform(prefix.iter().chain(&cycle)) {
            return Err(TraceError::MixedVariables);
        }
        Ok(PeriodicSeq { prefix, cycle })
    }

    /// The constant sequence `a a a ...`.
    pub fn constant(a: Assignment) -> Self {
        PeriodicSeq {
            prefix: Vec::new(),
            cycle: vec![a],
        }
    }

    pub fn prefix(&self) -> &[Assignment] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[Assignment] {
        &self.cycle
    }

    /// Length of the prefix (`x`).
    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    /// Length of the loop (`y`).
    pub fn loop_len(&self) -> usize {
        self.cycle.len()
    }

    pub fn names(&self) -> &Arc<[String]> {
        self.cycle[0].names()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, i: usize) -> &Assignment {
        let x = self.prefix.len();
        if i < x {
            &self.prefix[i]
        } else {
            &self.cycle[(i - x) % self.cycle.len()]
        }
    }

    /// Minimal loop first, then minimal prefix. Pointwise equal to `self`.
    pub fn normalize(&self) -> PeriodicSeq {
        let y = self.cycle.len();
        let period = (1..=y)
            .filter(|&p| y.is_multiple_of(p))
            .find(|&p| (p..y).all(|i| self.cycle[i] == self.cycle[i - p]))
            .unwrap_or(y);
        let mut cycle: Vec<Assignment> = self.cycle[..period].to_vec();
        let mut prefix = self.prefix.clone();
        while prefix.last().is_some() && prefix.last() == cycle.last() {
            prefix.pop();
            cycle.rotate_right(1);
        }
        PeriodicSeq { prefix, cycle }
    }

    /// The first `n` states.
    pub fn unroll(&self, n: usize) -> Vec<Assignment> {
        (0..n).map(|i| self.index(i).clone()).collect()
    }

    /// The subsequence `i ↦ self(i·k)`.
    pub fn stepped(&self, k: usize) -> Result<PeriodicSeq, TraceError> {
        if k == 0 {
            return Err(TraceError::ZeroFactor);
        }
        let x = self.prefix.len().div_ceil(k);
        let y = self.cycle.len() / gcd(k, self.cycle.len());
        Ok(PeriodicSeq {
            prefix: (0..x).map(|i| self.index(i * k).clone()).collect(),
            cycle: (x..x + y).map(|i| self.index(i * k).clone()).collect(),
        })
    }

    /// Restriction of every state to `names`.
    pub fn project<S: AsRef<str>>(&self, names: &[S]) -> Result<PeriodicSeq, TraceError> {
        let names: Arc<[String]> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let proj = |a: &Assignment| -> Result<Assignment, TraceError> {
            a.project(&names).ok_or_else(|| {
                let missing = names.iter().find(|n| a.get(n).is_none()).cloned().unwrap_or_default();
                TraceError::UnknownObservable(missing)
            })
        };
        Ok(PeriodicSeq {
            prefix: self.prefix.iter().map(proj).collect::<Result<_, _>>()?,
            cycle: self.cycle.iter().map(proj).collect::<Result<_, _>>()?,
        })
    }

    /// `prefix | loop` with states separated by `; `.
    pub fn render(&self) -> String {
        let join = |xs: &[Assignment]| xs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("; ");
        if self.prefix.is_empty() {
            format!("| {}", join(&self.cycle))
        } else {
            format!("{} | {}", join(&self.prefix), join(&self.cycle))
        }
    }
}

impl fmt::Display for PeriodicSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for PeriodicSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeriodicSeq({})", self.render())
    }
}

/// A bounded unrolling, indexed from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTrace {
    states: Vec<Assignment>,
}

impl FiniteTrace {
    pub fn new(states: Vec<Assignment>) -> Result<Self, TraceError> {
        if states.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        if !uniform(states.iter()) {
            return Err(TraceError::MixedVariables);
        }
        Ok(FiniteTrace { states })
    }

    pub fn states(&self) -> &[Assignment] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Assignment> {
        self.states.get(i)
    }

    pub fn names(&self) -> &Arc<[String]> {
        self.states[0].names()
    }
}

impl fmt::Display for FiniteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.states.iter().enumerate() {
            writeln!(f, "{i}: {s}")?;
        }
        Ok(())
    }
}

/// First point where two sequences disagree on an observable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub variable: String,
    pub left: Value,
    pub right: Value,
}

fn positions<S: AsRef<str>>(names: &[String], observe: &[S]) -> Result<Vec<usize>, TraceError> {
    observe
        .iter()
        .map(|o| {
            names
                .iter()
                .position(|n| n == o.as_ref())
                .ok_or_else(|| TraceError::UnknownObservable(o.as_ref().to_string()))
        })
        .collect()
}

/// Earliest index (from 1, or from 0 when `strict`) at which the projections
/// of `s1` and `s2` onto `observe` differ. Exact: beyond
/// `max(x1, x2) + lcm(y1, y2)` both sequences repeat jointly.
pub fn first_divergence<S: AsRef<str>>(
    s1: &PeriodicSeq,
    s2: &PeriodicSeq,
    observe: &[S],
    strict: bool,
) -> Result<Option<Divergence>, TraceError> {
    let p1 = positions(s1.names(), observe)?;
    let p2 = positions(s2.names(), observe)?;
    let horizon = s1.prefix_len().max(s2.prefix_len()) + lcm(s1.loop_len(), s2.loop_len());
    let start = if strict { 0 } else { 1 };
    for i in start..=horizon {
        let (a, b) = (s1.index(i).values(), s2.index(i).values());
        for (k, (&i1, &i2)) in p1.iter().zip(&p2).enumerate() {
            if a[i1] != b[i2] {
                return Ok(Some(Divergence {
                    index: i,
                    variable: observe[k].as_ref().to_string(),
                    left: a[i1].clone(),
                    right: b[i2].clone(),
                }));
            }
        }
    }
    Ok(None)
}

/// Agreement on `observe` at every index `i ≥ 1`.
pub fn seq_equal<S: AsRef<str>>(s1: &PeriodicSeq, s2: &PeriodicSeq, observe: &[S]) -> Result<bool, TraceError> {
    Ok(first_divergence(s1, s2, observe, false)?.is_none())
}

/// Like [`seq_equal`] but index 0 is compared too.
pub fn seq_equal_strict<S: AsRef<str>>(s1: &PeriodicSeq, s2: &PeriodicSeq, observe: &[S]) -> Result<bool, TraceError> {
    Ok(first_divergence(s1, s2, observe, true)?.is_none())
}

/// `s1(i)` agrees with `s2(i·k)` on `observe` for every `i ≥ 1`.
pub fn seq_equal_rescaled<S: AsRef<str>>(
    s1: &PeriodicSeq,
    s2: &PeriodicSeq,
    observe: &[S],
    k: usize,
) -> Result<bool, TraceError> {
    seq_equal(s1, &s2.stepped(k)?, observe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(vals: &[i64]) -> Assignment {
        let names: Vec<String> = (0..vals.len()).map(|i| format!("V{i}")).collect();
        Assignment::new(names.into(), vals.iter().map(|&v| Value::Int(v)).collect())
    }

    fn seq(prefix: &[i64], cycle: &[i64]) -> PeriodicSeq {
        PeriodicSeq::new(
            prefix.iter().map(|&v| st(&[v])).collect(),
            cycle.iter().map(|&v| st(&[v])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn indexing_walks_prefix_then_loop() {
        let s = seq(&[0], &[1, 2]);
        let got: Vec<i64> = (0..4).map(|i| s.index(i).values()[0].as_int().unwrap()).collect();
        assert_eq!(got, vec![0, 1, 2, 1]);
        let c = seq(&[], &[7]);
        assert!((0..50).all(|i| c.index(i) == &st(&[7])));
    }

    #[test]
    fn treatment_context_index() {
        let ctx = seq(&[0, 1, 0, 1, 1, 0], &[0]);
        assert_eq!(ctx.index(4), &st(&[1]));
        assert_eq!(ctx.index(100), &st(&[0]));
    }

    #[test]
    fn empty_loop_rejected() {
        assert_eq!(PeriodicSeq::new(vec![st(&[0])], vec![]), Err(TraceError::EmptyLoop));
    }

    #[test]
    fn mixed_variables_rejected() {
        let other = Assignment::from_pairs([("W", Value::Int(0))]);
        assert_eq!(
            PeriodicSeq::new(vec![st(&[0])], vec![other]),
            Err(TraceError::MixedVariables)
        );
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(seq(&[], &[1, 1]).normalize(), seq(&[], &[1]));
        assert_eq!(seq(&[0, 1], &[1]).normalize(), seq(&[0], &[1]));
        let s = seq(&[0], &[1, 2, 1, 2]);
        let n = s.normalize();
        assert_eq!(n, seq(&[0], &[1, 2]));
        let horizon = s.prefix_len() + 2 * lcm(s.loop_len(), n.loop_len());
        assert!((0..horizon).all(|i| s.index(i) == n.index(i)));
        // absorption rotates the loop
        assert_eq!(seq(&[5, 2, 1], &[2, 1]).normalize(), seq(&[5], &[2, 1]));
    }

    #[test]
    fn equality_ignores_index_zero_unless_strict() {
        let a = seq(&[0], &[1]);
        let b = seq(&[9], &[1]);
        assert!(seq_equal(&a, &b, &["V0"]).unwrap());
        assert!(!seq_equal_strict(&a, &b, &["V0"]).unwrap());
        let d = first_divergence(&a, &b, &["V0"], true).unwrap().unwrap();
        assert_eq!((d.index, d.variable.as_str()), (0, "V0"));
    }

    #[test]
    fn equal_under_different_representations() {
        let a = seq(&[0], &[1, 1]);
        let b = seq(&[0, 1], &[1]);
        assert!(seq_equal(&a, &b, &["V0"]).unwrap());
        assert!((0..64).all(|i| a.index(i) == b.index(i)));
    }

    #[test]
    fn unknown_observable() {
        let a = seq(&[], &[1]);
        assert_eq!(
            seq_equal(&a, &a, &["Q"]),
            Err(TraceError::UnknownObservable("Q".into()))
        );
    }

    #[test]
    fn late_divergence_inside_joint_period_is_found() {
        // loops of length 1 and 6 agree on the first five positions only
        let a = seq(&[], &[0]);
        let b = seq(&[], &[0, 0, 0, 0, 0, 1]);
        let d = first_divergence(&a, &b, &["V0"], false).unwrap().unwrap();
        assert_eq!(d.index, 5);
    }

    #[test]
    fn rescaled_example() {
        // s2(2i) = s1(i) for i >= 1; odd positions carry junk
        let s1 = seq(&[], &[1, 2]);
        let s2 = seq(&[3], &[9, 2, 9, 1]);
        assert!(seq_equal_rescaled(&s1, &s2, &["V0"], 2).unwrap());
        assert!(!seq_equal_rescaled(&s1, &s2, &["V0"], 1).unwrap());
        assert_eq!(
            seq_equal_rescaled(&s1, &s1, &["V0"], 1).unwrap(),
            seq_equal(&s1, &s1, &["V0"]).unwrap()
        );
        for i in 1..64 {
            assert_eq!(s1.index(i), s2.index(2 * i));
        }
    }

    #[test]
    fn render_form() {
        assert_eq!(seq(&[0], &[1, 2]).render(), "V0=0 | V0=1; V0=2");
        assert_eq!(seq(&[], &[1]).render(), "| V0=1");
    }

    fn arb_seq() -> impl Strategy<Value = PeriodicSeq> {
        (
            proptest::collection::vec(0i64..3, 0..5),
            proptest::collection::vec(0i64..3, 1..5),
        )
            .prop_map(|(p, c)| seq(&p, &c))
    }

    fn pointwise(a: &PeriodicSeq, b: &PeriodicSeq, from: usize, to: usize) -> bool {
        (from..to).all(|i| a.index(i) == b.index(i))
    }

    proptest! {
        #[test]
        fn normalize_preserves_points(s in arb_seq()) {
            let n = s.normalize();
            prop_assert!(pointwise(&s, &n, 0, s.prefix_len() + 3 * s.loop_len()));
            prop_assert_eq!(n.normalize(), n.clone());
            prop_assert!(n.loop_len() <= s.loop_len() && n.prefix_len() <= s.prefix_len());
        }

        #[test]
        fn equality_matches_brute_force(a in arb_seq(), b in arb_seq()) {
            let horizon = a.prefix_len().max(b.prefix_len()) + 2 * lcm(a.loop_len(), b.loop_len());
            prop_assert_eq!(seq_equal(&a, &b, &["V0"]).unwrap(), pointwise(&a, &b, 1, horizon));
            prop_assert_eq!(seq_equal_strict(&a, &b, &["V0"]).unwrap(), pointwise(&a, &b, 0, horizon));
        }

        #[test]
        fn equality_is_an_equivalence(a in arb_seq(), b in arb_seq(), c in arb_seq()) {
            let eq = |p: &PeriodicSeq, q: &PeriodicSeq| seq_equal(p, q, &["V0"]).unwrap();
            prop_assert!(eq(&a, &a));
            prop_assert_eq!(eq(&a, &b), eq(&b, &a));
            if eq(&a, &b) && eq(&b, &c) {
                prop_assert!(eq(&a, &c));
            }
        }

        #[test]
        fn stepping_matches_pointwise(s in arb_seq(), k in 1usize..5) {
            let t = s.stepped(k).unwrap();
            prop_assert!((0..40).all(|i| t.index(i) == s.index(i * k)));
        }

        #[test]
        fn rescaled_matches_brute_force(a in arb_seq(), b in arb_seq(), k in 1usize..4) {
            let brute = (1..64).all(|i| a.index(i) == b.index(i * k));
            prop_assert_eq!(seq_equal_rescaled(&a, &b, &["V0"], k).unwrap(), brute);
        }
    }
}
