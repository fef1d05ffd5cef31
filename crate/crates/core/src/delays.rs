//! Equations with arbitrary lags, simulated directly or compiled into an
//! equivalent one-step model.
//!
//! A compiled model carries, for every source variable `Z` read at lag `t`,
//! a chain `Z__1, .., Z__(t-1)` of copies whose range is `R(Z)` plus `#`.
//! `Z__s` at step `j` holds `Z(j-s)` once `j >= s` and `#` before that.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::engine::{periodic_computation, Computation, EngineError, Intervention, Scenario};
use crate::model::{
    lower_equations, Assignment, BinOp, EvalError, Expr, Model, ModelError, RefMode, Signature, Slot, Value, VarKind,
    VarRef, Variable,
};
use crate::trace::{FiniteTrace, PeriodicSeq};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DelayError {
    #[error("unknown endogenous variable {0}")]
    UnknownVariable(String),
}

/// A model whose equations read `Z[-t]`, the value of `Z` exactly `t` steps
/// back, for any `t` up to the maximal delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayedModel {
    signature: Signature,
    equations: Vec<Expr>,
    lowered: Vec<Expr<Slot>>,
    domains: Vec<BTreeSet<(String, u32)>>,
    xi: u32,
}

impl DelayedModel {
    /// Validates the equations. `xi`, when given, bounds every lag; otherwise
    /// it is the largest lag used.
    pub fn new(signature: Signature, equations: Vec<(String, Expr)>, xi: Option<u32>) -> Result<Self, ModelError> {
        let (equations, lowered) = lower_equations(&signature, equations, RefMode::Delayed)?;
        let domains: Vec<BTreeSet<(String, u32)>> = equations
            .iter()
            .map(|e| {
                let mut d = BTreeSet::new();
                e.for_each_ref(&mut |r: &VarRef| {
                    if let VarRef::Lag(n, t) = r {
                        d.insert((n.clone(), *t));
                    }
                });
                d
            })
            .collect();
        let max_lag = domains.iter().flatten().map(|(_, t)| *t).max().unwrap_or(0);
        let xi = match xi {
            Some(x) if x < max_lag => {
                let (var, (z, t)) = signature
                    .endogenous()
                    .iter()
                    .zip(&domains)
                    .find_map(|(v, d)| d.iter().find(|(_, t)| *t > x).map(|p| (v.name.clone(), p.clone())))
                    .expect("some lag exceeds xi");
                return Err(ModelError::BadReference {
                    var,
                    message: format!("{z}[-{t}] exceeds the maximal delay {x}"),
                });
            }
            Some(x) => x,
            None => max_lag,
        };
        Ok(DelayedModel {
            signature,
            equations,
            lowered,
            domains,
            xi,
        })
    }

    pub fn from_sources<S: AsRef<str>>(
        signature: Signature,
        equations: impl IntoIterator<Item = (S, S)>,
        xi: Option<u32>,
    ) -> Result<Self, ModelError> {
        let parsed = equations
            .into_iter()
            .map(|(name, src)| {
                let name = name.as_ref().to_string();
                Expr::parse(src.as_ref())
                    .map(|e| (name.clone(), e))
                    .map_err(|source| ModelError::Syntax { var: name, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        DelayedModel::new(signature, parsed, xi)
    }

    /// Reads a one-step model as the delayed model with every lag equal to 1.
    pub fn from_onestep(m: &Model) -> Self {
        let sig = m.signature().clone();
        let eqs = sig
            .endogenous()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let e = m
                    .equation(i)
                    .try_map_refs(&mut |r: &VarRef| Ok::<_, ()>(Expr::Ref(VarRef::Lag(r.name().to_string(), 1))))
                    .expect("infallible");
                (v.name.clone(), e)
            })
            .collect();
        DelayedModel::new(sig, eqs, None).expect("a valid one-step model stays valid")
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn equation(&self, i: usize) -> &Expr {
        &self.equations[i]
    }

    /// Temporal parents `(Z, t)` of the `i`-th endogenous variable.
    pub fn domain(&self, i: usize) -> &BTreeSet<(String, u32)> {
        &self.domains[i]
    }

    pub fn xi(&self) -> u32 {
        self.xi
    }

    /// Largest lag among the parents of `x`; 0 when it has none.
    pub fn d_max(&self, x: &str) -> Result<u32, DelayError> {
        match self.signature.lookup(x) {
            Some((VarKind::Endogenous, i)) => Ok(self.d_of(i)),
            _ => Err(DelayError::UnknownVariable(x.to_string())),
        }
    }

    fn d_of(&self, i: usize) -> u32 {
        self.domains[i].iter().map(|(_, t)| *t).max().unwrap_or(0)
    }
}

fn scenario_checks(sig: &Signature, ctx: &PeriodicSeq, v0: &Assignment, int: &Intervention) -> Result<(), EngineError> {
    if **ctx.names() != **sig.exo_names() {
        return Err(EngineError::Scenario(format!(
            "context ranges over ({}) but the exogenous variables are ({})",
            ctx.names().join(", "),
            sig.exo_names().join(", ")
        )));
    }
    for a in ctx.prefix().iter().chain(ctx.cycle()) {
        sig.check_assignment(VarKind::Exogenous, a)
            .map_err(|e| EngineError::Scenario(format!("context: {e}")))?;
    }
    sig.check_assignment(VarKind::Endogenous, v0)
        .map_err(|e| EngineError::Scenario(format!("initial state: {e}")))?;
    int.check(sig)?;
    Ok(())
}

/// The first `n` states of the delayed computation. Before step `d(X)` a
/// variable keeps its previous value; from then on its equation reads
/// `states[i-t]` (or the context at `i-t` for exogenous parents).
pub fn run_delayed(
    dm: &DelayedModel,
    ctx: &PeriodicSeq,
    v0: &Assignment,
    int: &Intervention,
    n: usize,
) -> Result<FiniteTrace, EngineError> {
    if n == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    let sig = &dm.signature;
    scenario_checks(sig, ctx, v0, int)?;
    let names = sig.endo_names().clone();
    let d: Vec<usize> = (0..names.len()).map(|i| dm.d_of(i) as usize).collect();
    let mut states: Vec<Vec<Value>> = vec![crate::engine::intervention_initial(v0, int).into_values()];
    for i in 1..n {
        let mut next = Vec::with_capacity(names.len());
        for (x, e) in dm.lowered.iter().enumerate() {
            if let Some(v) = int.value_at(&names[x], i) {
                next.push(v.clone());
                continue;
            }
            if i < d[x] {
                next.push(states[i - 1][x].clone());
                continue;
            }
            let var = &sig.endogenous()[x];
            let value = e
                .eval_with(&mut |s: &Slot| {
                    let j = i - s.lag as usize;
                    Ok(match s.kind {
                        VarKind::Exogenous => ctx.index(j).values()[s.index].clone(),
                        VarKind::Endogenous => states[j][s.index].clone(),
                    })
                })
                .map_err(|err| err.in_equation(&var.name).at_step(i))?;
            if !var.range.contains(&value) {
                return Err(EvalError::OutOfRange {
                    var: var.name.clone(),
                    value,
                }
                .at_step(i)
                .into());
            }
            next.push(value);
        }
        states.push(next);
    }
    let states = states
        .into_iter()
        .map(|vs| Assignment::new(names.clone(), vs))
        .collect();
    Ok(FiniteTrace::new(states).expect("non-empty and uniform"))
}

/// A one-step model equivalent to a delayed one on the original variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledModelMap {
    pub model: Arc<Model>,
    /// `(source, depth)` to the chain variable holding the source `depth`
    /// steps before the previous one.
    pub fresh: BTreeMap<(String, u32), String>,
    originals: Arc<[String]>,
}

impl CompiledModelMap {
    /// Names of the endogenous variables of the delayed model.
    pub fn originals(&self) -> &Arc<[String]> {
        &self.originals
    }

    /// Initial state of the compiled model: originals copied, chains at `#`.
    pub fn lift_init(&self, v0: &Assignment) -> Assignment {
        let names = self.model.signature().endo_names().clone();
        let values = names
            .iter()
            .map(|n| v0.get(n).cloned().unwrap_or(Value::Undefined))
            .collect();
        Assignment::new(names, values)
    }

    pub fn project(&self, seq: &PeriodicSeq) -> PeriodicSeq {
        seq.project(&self.originals).expect("originals are compiled variables")
    }

    pub fn project_trace(&self, tr: &FiniteTrace) -> FiniteTrace {
        let states = tr
            .states()
            .iter()
            .map(|a| a.project(&self.originals).expect("originals are compiled variables"))
            .collect();
        FiniteTrace::new(states).expect("non-empty")
    }
}

fn fresh_name(source: &str, depth: u32, taken: &BTreeSet<String>) -> String {
    let mut name = format!("{source}__{depth}");
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

/// Builds the chained one-step model.
pub fn compile_to_onestep(dm: &DelayedModel) -> CompiledModelMap {
    let sig = &dm.signature;
    let mut taken: BTreeSet<String> = sig
        .exogenous()
        .iter()
        .chain(sig.endogenous())
        .map(|v| v.name.clone())
        .collect();

    // Deepest lag each source is read at, in declaration order.
    let mut needed: BTreeMap<&str, u32> = BTreeMap::new();
    for (z, t) in dm.domains.iter().flatten() {
        let e = needed.entry(z.as_str()).or_insert(0);
        *e = (*e).max(*t);
    }
    let mut fresh = BTreeMap::new();
    let mut chain_vars = Vec::new();
    let mut chain_eqs = Vec::new();
    for v in sig.exogenous().iter().chain(sig.endogenous()) {
        let Some(&deepest) = needed.get(v.name.as_str()) else {
            continue;
        };
        let mut below = v.name.clone();
        for s in 1..deepest {
            let name = fresh_name(&v.name, s, &taken);
            taken.insert(name.clone());
            chain_vars.push(Variable::endogenous(&name, v.range.clone().with_undefined()));
            chain_eqs.push((name.clone(), Expr::Ref(VarRef::Prev(below))));
            fresh.insert((v.name.clone(), s), name.clone());
            below = name;
        }
    }

    let mut eqs = Vec::new();
    for (i, v) in sig.endogenous().iter().enumerate() {
        let body = dm.equations[i]
            .try_map_refs(&mut |r: &VarRef| {
                let name = match r {
                    VarRef::Lag(z, 1) | VarRef::Prev(z) => z.clone(),
                    VarRef::Lag(z, t) => fresh[&(z.clone(), t - 1)].clone(),
                };
                Ok::<_, ()>(Expr::Ref(VarRef::Prev(name)))
            })
            .expect("infallible");
        let guards: Vec<Expr> = dm.domains[i]
            .iter()
            .filter(|(_, t)| *t >= 2)
            .map(|(z, t)| {
                Expr::Bin(
                    BinOp::Neq,
                    Box::new(Expr::Ref(VarRef::Prev(fresh[&(z.clone(), t - 1)].clone()))),
                    Box::new(Expr::Const(Value::Undefined)),
                )
            })
            .collect();
        let eq = match guards
            .into_iter()
            .reduce(|a, b| Expr::Bin(BinOp::And, Box::new(a), Box::new(b)))
        {
            None => body,
            Some(cond) => Expr::Ite(
                Box::new(cond),
                Box::new(body),
                Box::new(Expr::Ref(VarRef::Prev(v.name.clone()))),
            ),
        };
        eqs.push((v.name.clone(), eq));
    }
    eqs.extend(chain_eqs);

    let mut endo = sig.endogenous().to_vec();
    endo.extend(chain_vars);
    let sig1 = Signature::new(sig.exogenous().to_vec(), endo).expect("fresh names are distinct");
    let model = Model::new(sig1, eqs).expect("compiled equations type-check");
    CompiledModelMap {
        model: Arc::new(model),
        fresh,
        originals: sig.endo_names().clone(),
    }
}

/// Ultimately periodic computation of a delayed model, obtained through its
/// compilation. `seq` is projected onto the original variables and
/// normalized; `scenario` is the compiled one.
pub fn periodic_delayed(
    dm: &DelayedModel,
    ctx: &PeriodicSeq,
    v0: &Assignment,
    int: &Intervention,
) -> Result<Computation, EngineError> {
    scenario_checks(&dm.signature, ctx, v0, int)?;
    let cm = compile_to_onestep(dm);
    let sc = Scenario::new(cm.model.clone(), ctx.clone(), cm.lift_init(v0))?;
    let comp = periodic_computation(&sc, int)?;
    Ok(Computation {
        seq: cm.project(&comp.seq).normalize(),
        ..comp
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, tests::rocks_model};
    use crate::model::Range;
    use proptest::prelude::*;

    fn binary_sig(exo: &[&str], endo: &[&str]) -> Signature {
        Signature::new(
            exo.iter().map(|n| Variable::exogenous(n, Range::binary())).collect(),
            endo.iter().map(|n| Variable::endogenous(n, Range::binary())).collect(),
        )
        .unwrap()
    }

    fn rocks_delayed() -> DelayedModel {
        DelayedModel::from_sources(
            binary_sig(&["U_ST", "U_BT"], &["ST", "BT", "BS"]),
            [
                ("ST", "U_ST[-1]"),
                ("BT", "U_BT[-1]"),
                ("BS", "BS[-1] || ST[-2] || BT[-3]"),
            ],
            None,
        )
        .unwrap()
    }

    fn zero_ctx(sig: &Signature) -> PeriodicSeq {
        PeriodicSeq::constant(
            sig.assignment(
                VarKind::Exogenous,
                sig.exo_names().iter().map(|n| (n.as_str(), Value::Int(0))),
            )
            .unwrap(),
        )
    }

    fn zeros(sig: &Signature) -> Assignment {
        sig.assignment(
            VarKind::Endogenous,
            sig.endo_names().iter().map(|n| (n.as_str(), Value::Int(0))),
        )
        .unwrap()
    }

    fn first_one(tr: &FiniteTrace, var: &str) -> Option<usize> {
        tr.states().iter().position(|a| a.get(var) == Some(&Value::Int(1)))
    }

    #[test]
    fn d_max_values() {
        let dm = DelayedModel::from_sources(
            binary_sig(&[], &["A", "Z", "B", "C"]),
            [("A", "A[-1]"), ("Z", "Z[-1]"), ("B", "A[-1] && Z[-3]"), ("C", "1")],
            None,
        )
        .unwrap();
        assert_eq!(dm.d_max("B"), Ok(3));
        assert_eq!(dm.d_max("C"), Ok(0));
        assert_eq!(dm.d_max("A"), Ok(1));
        assert_eq!(dm.xi(), 3);
        assert!(matches!(dm.d_max("Q"), Err(DelayError::UnknownVariable(_))));
    }

    #[test]
    fn rejects_bare_refs_and_excess_lags() {
        let sig = binary_sig(&[], &["A"]);
        assert!(matches!(
            DelayedModel::from_sources(sig.clone(), [("A", "A")], None),
            Err(ModelError::BadReference { .. })
        ));
        assert!(matches!(
            DelayedModel::from_sources(sig, [("A", "A[-3]")], Some(2)),
            Err(ModelError::BadReference { .. })
        ));
    }

    #[test]
    fn rocks_first_shatter() {
        let dm = rocks_delayed();
        let sig = dm.signature().clone();
        let int = Intervention::new([("ST", 1, Value::Int(1)), ("BT", 0, Value::Int(1))]).unwrap();
        let tr = run_delayed(&dm, &zero_ctx(&sig), &zeros(&sig), &int, 10).unwrap();
        assert_eq!(first_one(&tr, "BS"), Some(3));
    }

    #[test]
    fn keeps_initial_value_before_d() {
        let dm = rocks_delayed();
        let sig = dm.signature().clone();
        let v0 = zeros(&sig).with("BS", Value::Int(1));
        let tr = run_delayed(&dm, &zero_ctx(&sig), &v0, &Intervention::empty(), 6).unwrap();
        for i in 0..3 {
            assert_eq!(tr.get(i).unwrap().get("BS"), Some(&Value::Int(1)));
        }
    }

    #[test]
    fn all_lag_one_matches_onestep_run() {
        let m = rocks_model();
        let dm = DelayedModel::from_onestep(&m);
        let sc = crate::engine::tests::rocks();
        let int = Intervention::new([("BT", 2, Value::Int(1))]).unwrap();
        let a = run(&sc, &int, 12).unwrap();
        let b = run_delayed(&dm, sc.context(), sc.init(), &int, 12).unwrap();
        assert_eq!(a, b);
        assert!(compile_to_onestep(&dm).fresh.is_empty());
    }

    #[test]
    fn chain_for_lag_three() {
        let dm = DelayedModel::from_sources(binary_sig(&["E"], &["Z", "B"]), [("Z", "E[-1]"), ("B", "Z[-3]")], None)
            .unwrap();
        let cm = compile_to_onestep(&dm);
        let names: Vec<_> = cm.fresh.values().cloned().collect();
        assert_eq!(names, ["Z__1", "Z__2"]);
        assert_eq!(
            cm.model.equation_of("B").unwrap().to_string(),
            "if Z__2 != # then Z__2 else B"
        );
        let r = cm.model.signature().variable("Z__2").unwrap().range.clone();
        assert!(r.contains(&Value::Undefined) && r.contains(&Value::Int(1)));
    }

    #[test]
    fn rocks_compiled_agrees() {
        let dm = rocks_delayed();
        let cm = compile_to_onestep(&dm);
        let sig = dm.signature().clone();
        let ctx = zero_ctx(&sig);
        let int = Intervention::new([("ST", 2, Value::Int(1)), ("BT", 1, Value::Int(1))]).unwrap();
        let direct = run_delayed(&dm, &ctx, &zeros(&sig), &int, 40).unwrap();
        let sc = Scenario::new(cm.model.clone(), ctx, cm.lift_init(&zeros(&sig))).unwrap();
        let compiled = cm.project_trace(&run(&sc, &int, 40).unwrap());
        assert_eq!(direct, compiled);
    }

    #[test]
    fn periodic_quiescent_rocks() {
        let dm = rocks_delayed();
        let sig = dm.signature().clone();
        let comp = periodic_delayed(&dm, &zero_ctx(&sig), &zeros(&sig), &Intervention::empty()).unwrap();
        assert_eq!(comp.seq.prefix_len(), 0);
        assert_eq!(comp.seq.loop_len(), 1);
        assert_eq!(comp.seq.index(0), &zeros(&sig));
    }

    fn arb_body(depth: u32) -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            (0..3usize, 1..=4u32).prop_map(|(v, t)| format!("{}[-{t}]", ["A", "B", "E"][v])),
            (0..2i64).prop_map(|c| c.to_string()),
        ];
        leaf.prop_recursive(depth, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| format!("!({a})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} && {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} || {b})")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("({a} != {b})")),
            ]
        })
        .boxed()
    }

    fn arb_case() -> impl Strategy<Value = (DelayedModel, PeriodicSeq, Assignment, Intervention)> {
        (
            arb_body(3),
            arb_body(3),
            prop::collection::vec(0..2i64, 0..3),
            prop::collection::vec(0..2i64, 1..3),
            (0..2i64, 0..2i64),
            prop::collection::vec((0..2usize, 0..8usize, 0..2i64), 0..3),
        )
            .prop_map(|(fa, fb, pre, lp, (a0, b0), pins)| {
                let sig = binary_sig(&["E"], &["A", "B"]);
                let dm =
                    DelayedModel::from_sources(sig.clone(), [("A", fa.as_str()), ("B", fb.as_str())], None).unwrap();
                let u = |x: i64| sig.assignment(VarKind::Exogenous, [("E", Value::Int(x))]).unwrap();
                let ctx = PeriodicSeq::new(pre.into_iter().map(u).collect(), lp.into_iter().map(u).collect()).unwrap();
                let v0 = sig
                    .assignment(VarKind::Endogenous, [("A", Value::Int(a0)), ("B", Value::Int(b0))])
                    .unwrap();
                let mut seen = BTreeSet::new();
                let int = Intervention::new(
                    pins.into_iter()
                        .filter(|(v, t, _)| seen.insert((*v, *t)))
                        .map(|(v, t, x)| (["A", "B"][v], t, Value::Int(x))),
                )
                .unwrap();
                (dm, ctx, v0, int)
            })
    }

    proptest! {
        #[test]
        fn compilation_is_sound((dm, ctx, v0, int) in arb_case()) {
            let cm = compile_to_onestep(&dm);
            let direct = run_delayed(&dm, &ctx, &v0, &int, 40).unwrap();
            let sc = Scenario::new(cm.model.clone(), ctx.clone(), cm.lift_init(&v0)).unwrap();
            let full = run(&sc, &int, 40).unwrap();
            for a in full.states() {
                for n in cm.originals().iter() {
                    prop_assert_ne!(a.get(n), Some(&Value::Undefined));
                }
            }
            prop_assert_eq!(&direct, &cm.project_trace(&full));

            let bound: usize = (0..2).map(|i| dm.domain(i).iter().map(|(_, t)| *t as usize - 1).sum::<usize>()).sum();
            prop_assert!(cm.model.signature().endogenous().len() <= 2 + bound);

            let comp = periodic_delayed(&dm, &ctx, &v0, &int).unwrap();
            for (i, a) in direct.states().iter().enumerate() {
                prop_assert_eq!(comp.seq.index(i), a);
            }
        }

        #[test]
        fn compiled_equations_reparse((dm, _ctx, _v0, _int) in arb_case()) {
            let cm = compile_to_onestep(&dm);
            let sig = cm.model.signature().clone();
            let srcs: Vec<(String, String)> = sig
                .endo_names()
                .iter()
                .map(|n| (n.clone(), cm.model.equation_of(n).unwrap().to_string()))
                .collect();
            let again = Model::from_sources(sig, srcs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
            prop_assert_eq!(&again, &*cm.model);
        }
    }
}
