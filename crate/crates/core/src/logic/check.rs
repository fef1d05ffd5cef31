//! Path model checking on ultimately periodic computations.

use std::collections::HashMap;

use super::{Cpltl, LogicError, Pltl};
use crate::engine::{periodic_computation, Computation, Intervention, Scenario};
use crate::model::Value;
use crate::trace::{FiniteTrace, PeriodicSeq};

/// Position equivalent to `t` for a formula of past height `h` on a sequence
/// of type `(x, y)`: every subformula is `y`-periodic from `x + h·y` on.
pub fn reduce_position(t: usize, x: usize, y: usize, h: usize) -> usize {
    assert!(y >= 1, "loop length must be positive");
    let limit = x + (h + 1) * y;
    if t <= limit {
        t
    } else {
        (t - limit) % y + x + h * y
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Atom(usize, Value),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Next(usize),
    Until(usize, usize),
    Prev(usize),
    Since(usize, usize),
}

/// Subformula DAG in child-before-parent order, shared subterms merged.
/// Nodes are keyed by their children's indices, so merging costs O(1) per
/// node however deep the formula is.
struct Dag {
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
}

impl Dag {
    fn build(f: &Pltl, names: &[String]) -> Result<(Dag, usize), LogicError> {
        let mut dag = Dag {
            nodes: Vec::new(),
            index: HashMap::new(),
        };
        let root = dag.add(f, names)?;
        Ok((dag, root))
    }

    fn add(&mut self, f: &Pltl, names: &[String]) -> Result<usize, LogicError> {
        let node = match f {
            Pltl::True => Node::True,
            Pltl::False => Node::False,
            Pltl::Atom { var, value } => {
                let col = names
                    .iter()
                    .position(|n| n == var)
                    .ok_or_else(|| LogicError::UnknownVariable(var.clone()))?;
                Node::Atom(col, value.clone())
            }
            Pltl::Not(a) => Node::Not(self.add(a, names)?),
            Pltl::Next(a) => Node::Next(self.add(a, names)?),
            Pltl::Prev(a) => Node::Prev(self.add(a, names)?),
            Pltl::And(a, b) => Node::And(self.add(a, names)?, self.add(b, names)?),
            Pltl::Or(a, b) => Node::Or(self.add(a, names)?, self.add(b, names)?),
            Pltl::Implies(a, b) => Node::Implies(self.add(a, names)?, self.add(b, names)?),
            Pltl::Until(a, b) => Node::Until(self.add(a, names)?, self.add(b, names)?),
            Pltl::Since(a, b) => Node::Since(self.add(a, names)?, self.add(b, names)?),
        };
        if let Some(&i) = self.index.get(&node) {
            return Ok(i);
        }
        self.nodes.push(node.clone());
        let i = self.nodes.len() - 1;
        self.index.insert(node, i);
        Ok(i)
    }
}

/// Truth values of every subformula on positions `0..x+(h+1)·y`.
fn label(c: &PeriodicSeq, dag: &Dag, h: usize) -> Vec<Vec<bool>> {
    let (x, y) = (c.prefix_len(), c.loop_len());
    let d = x + (h + 1) * y;
    let back = d - y;
    let mut labels: Vec<Vec<bool>> = Vec::with_capacity(dag.nodes.len());
    for node in &dag.nodes {
        let mut out = vec![false; d];
        match node {
            Node::True => out.fill(true),
            Node::False => {}
            Node::Atom(col, v) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = c.index(i).values()[*col] == *v;
                }
            }
            Node::Not(a) => {
                for (o, &p) in out.iter_mut().zip(&labels[*a]) {
                    *o = !p;
                }
            }
            Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) => {
                let (la, lb) = (&labels[*a], &labels[*b]);
                for i in 0..d {
                    out[i] = match node {
                        Node::And(..) => la[i] && lb[i],
                        Node::Or(..) => la[i] || lb[i],
                        _ => !la[i] || lb[i],
                    };
                }
            }
            Node::Prev(a) => {
                let la = &labels[*a];
                out[1..d].copy_from_slice(&la[..d - 1]);
            }
            Node::Since(a, b) => {
                let (la, lb) = (&labels[*a], &labels[*b]);
                let mut prev = false;
                for i in 0..d {
                    prev = lb[i] || (la[i] && prev);
                    out[i] = prev;
                }
            }
            Node::Next(a) => {
                let la = &labels[*a];
                for i in 0..d {
                    out[i] = la[if i + 1 < d { i + 1 } else { back }];
                }
            }
            Node::Until(a, b) => {
                let (la, lb) = (&labels[*a], &labels[*b]);
                // last block is a cycle: first pass with a false boundary
                // settles position `back`, second pass uses it
                let mut boundary = false;
                for _ in 0..2 {
                    let mut next = boundary;
                    for i in (back..d).rev() {
                        next = lb[i] || (la[i] && next);
                        out[i] = next;
                    }
                    boundary = out[back];
                }
                let mut next = out[back];
                for i in (0..back).rev() {
                    next = lb[i] || (la[i] && next);
                    out[i] = next;
                }
            }
        }
        labels.push(out);
    }
    labels
}

/// `(c, t) ⊨ f`, in time linear in `(x + (h+1)·y)·|f|`.
pub fn check_pltl(c: &PeriodicSeq, t: usize, f: &Pltl) -> Result<bool, LogicError> {
    let (dag, root) = Dag::build(f, c.names())?;
    let h = f.past_height();
    let (x, y) = (c.prefix_len(), c.loop_len());
    let d = x + (h + 1) * y;
    let mut r = reduce_position(t, x, y, h);
    if r >= d {
        r -= y;
    }
    Ok(label(c, &dag, h)[root][r])
}

/// Direct semantics on an explicit lasso whose last state is followed by
/// `loop_back`. Past operators read node indices as positions, so `tr`
/// should be long enough for every subformula to be periodic on its loop.
pub fn naive_check_pltl(tr: &FiniteTrace, t: usize, f: &Pltl, loop_back: usize) -> Result<bool, LogicError> {
    let n = tr.len();
    if loop_back >= n {
        return Err(LogicError::BadLoopBack { loop_back, len: n });
    }
    let succ = |i: usize| if i + 1 < n { i + 1 } else { loop_back };
    fn eval(tr: &FiniteTrace, f: &Pltl, succ: &dyn Fn(usize) -> usize) -> Result<Vec<bool>, LogicError> {
        let n = tr.len();
        Ok(match f {
            Pltl::True => vec![true; n],
            Pltl::False => vec![false; n],
            Pltl::Atom { var, value } => {
                let mut out = Vec::with_capacity(n);
                for s in tr.states() {
                    let v = s.get(var).ok_or_else(|| LogicError::UnknownVariable(var.clone()))?;
                    out.push(v == value);
                }
                out
            }
            Pltl::Not(a) => eval(tr, a, succ)?.into_iter().map(|b| !b).collect(),
            Pltl::And(a, b) | Pltl::Or(a, b) | Pltl::Implies(a, b) => {
                let (la, lb) = (eval(tr, a, succ)?, eval(tr, b, succ)?);
                (0..n)
                    .map(|i| match f {
                        Pltl::And(..) => la[i] && lb[i],
                        Pltl::Or(..) => la[i] || lb[i],
                        _ => !la[i] || lb[i],
                    })
                    .collect()
            }
            Pltl::Next(a) => {
                let la = eval(tr, a, succ)?;
                (0..n).map(|i| la[succ(i)]).collect()
            }
            Pltl::Prev(a) => {
                let la = eval(tr, a, succ)?;
                (0..n).map(|i| i >= 1 && la[i - 1]).collect()
            }
            Pltl::Since(a, b) => {
                let (la, lb) = (eval(tr, a, succ)?, eval(tr, b, succ)?);
                (0..n)
                    .map(|i| (0..=i).any(|k| lb[k] && (k + 1..=i).all(|j| la[j])))
                    .collect()
            }
            Pltl::Until(a, b) => {
                let (la, lb) = (eval(tr, a, succ)?, eval(tr, b, succ)?);
                let mut out = lb.clone();
                loop {
                    let mut changed = false;
                    for i in 0..n {
                        if !out[i] && la[i] && out[succ(i)] {
                            out[i] = true;
                            changed = true;
                        }
                    }
                    if !changed {
                        break out;
                    }
                }
            }
        })
    }
    let pos = if t < n {
        t
    } else {
        loop_back + (t - n) % (n - loop_back)
    };
    Ok(eval(tr, f, &succ)?[pos])
}

/// Evaluates CPLTL formulas on one scenario, computing each distinct
/// intervened computation once.
pub struct CpltlChecker {
    scenario: Scenario,
    cache: HashMap<Intervention, Computation>,
}

impl CpltlChecker {
    pub fn new(scenario: Scenario) -> Self {
        CpltlChecker {
            scenario,
            cache: HashMap::new(),
        }
    }

    pub fn computation(&mut self, int: &Intervention) -> Result<&Computation, LogicError> {
        if !self.cache.contains_key(int) {
            let c = periodic_computation(&self.scenario, int)?;
            self.cache.insert(int.clone(), c);
        }
        Ok(&self.cache[int])
    }

    pub fn check(&mut self, t: usize, f: &Cpltl) -> Result<bool, LogicError> {
        Ok(match f {
            Cpltl::Intervened(int, body) => check_pltl(&self.computation(int)?.seq, t, body)?,
            Cpltl::Not(a) => !self.check(t, a)?,
            Cpltl::And(a, b) => self.check(t, a)? && self.check(t, b)?,
            Cpltl::Or(a, b) => self.check(t, a)? || self.check(t, b)?,
        })
    }
}

/// `(M, ū, v), t ⊨ f`.
pub fn check_cpltl(sc: &Scenario, t: usize, f: &Cpltl) -> Result<bool, LogicError> {
    CpltlChecker::new(sc.clone()).check(t, f)
}
