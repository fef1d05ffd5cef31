//! Temporal and rescalable equivalence of models with respect to observables.
//!
//! Each instance `(intervention, context, v1)` is decided exactly: every
//! initial assignment of the other model is tried and the two computations
//! are compared up to their joint period. Model-level equivalence quantifies
//! over infinitely many contexts, so the model-level tests can only refute or
//! report that no counterexample was found within the sampled bounds.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{empty_context, periodic_computation, EngineError, Intervention, Scenario, Stepper};
use crate::model::{Assignment, Model, Value, VarKind};
use crate::trace::{gcd, lcm, Divergence, PeriodicSeq};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquivError {
    #[error("incompatible signatures: {0}")]
    IncompatibleSignatures(String),
    #[error("intervention on {0}, which is not observable")]
    InterventionOutsideObservables(String),
    #[error("observable {0} is not an endogenous variable of both models")]
    UnknownObservable(String),
    #[error("observable {0} has different ranges in the two models")]
    RangeMismatch(String),
    #[error("the observable set must not be empty")]
    EmptyObservables,
    #[error("invalid sampler configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Names that are endogenous in both models, with equal ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservableSet {
    names: Vec<String>,
}

impl ObservableSet {
    pub fn new<S: AsRef<str>>(m1: &Model, m2: &Model, names: &[S]) -> Result<Self, EquivError> {
        if names.is_empty() {
            return Err(EquivError::EmptyObservables);
        }
        let mut out: Vec<String> = Vec::new();
        for n in names {
            let n = n.as_ref();
            let range = |m: &Model| match m.signature().lookup(n) {
                Some((VarKind::Endogenous, i)) => Ok(m.signature().endogenous()[i].range.clone()),
                _ => Err(EquivError::UnknownObservable(n.to_string())),
            };
            if range(m1)? != range(m2)? {
                return Err(EquivError::RangeMismatch(n.to_string()));
            }
            if !out.iter().any(|o| o == n) {
                out.push(n.to_string());
            }
        }
        Ok(ObservableSet { names: out })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `v1` drawn for the first model, a match searched in the second.
    Forward,
    /// Roles swapped.
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "a->b",
            Direction::Backward => "b->a",
        })
    }
}

/// An instance for which no initial assignment of the other model matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub direction: Direction,
    /// Intervention applied to the model whose initial state was given
    /// (the other model runs it scaled by the rescaling factor).
    pub intervention: Intervention,
    pub context: PeriodicSeq,
    pub given: Assignment,
    /// Candidate that agreed for the longest time.
    pub closest: Assignment,
    /// First index where `closest` disagrees, in the given model's time.
    pub index: usize,
    pub variable: String,
    pub expected: Value,
    pub found: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivVerdict {
    NoCounterexampleFound { instances: usize },
    Counterexample(Box<Counterexample>),
}

impl EquivVerdict {
    pub fn is_counterexample(&self) -> bool {
        matches!(self, EquivVerdict::Counterexample(_))
    }
}

/// Bounds for sampling instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    pub max_int_size: usize,
    pub max_time: usize,
    pub max_prefix: usize,
    pub max_loop: usize,
    /// Values tried first when searching initial assignments of the
    /// matched model (a partial assignment by name).
    pub hint: Vec<(String, Value)>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 200,
            seed: 0,
            max_int_size: 2,
            max_time: 6,
            max_prefix: 3,
            max_loop: 3,
            hint: Vec::new(),
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<(), EquivError> {
        if self.samples == 0 {
            return Err(EquivError::BadConfig("samples must be positive".into()));
        }
        if self.max_loop == 0 {
            return Err(EquivError::BadConfig("max loop length must be positive".into()));
        }
        Ok(())
    }
}

/// Every intervention with times multiplied by `k`.
pub fn scale_intervention(int: &Intervention, k: usize) -> Intervention {
    int.scaled(k)
}

fn check_compatible(m1: &Model, m2: &Model) -> Result<(), EquivError> {
    if m1.signature().exogenous() != m2.signature().exogenous() {
        return Err(EquivError::IncompatibleSignatures(
            "the models must share their exogenous variables and ranges".into(),
        ));
    }
    Ok(())
}

fn check_int(int: &Intervention, obs: &ObservableSet) -> Result<(), EquivError> {
    match int.entries().iter().find(|e| !obs.names.contains(&e.var)) {
        Some(e) => Err(EquivError::InterventionOutsideObservables(e.var.clone())),
        None => Ok(()),
    }
}

/// Initial assignments of `m` with preferred values first for each variable.
fn candidates<'a>(
    m: &'a Model,
    prefer: &'a [&'a Assignment],
    hint: &'a [(String, Value)],
) -> impl Iterator<Item = Assignment> + 'a {
    let vars = m.signature().endogenous();
    let orders: Vec<Vec<Value>> = vars
        .iter()
        .map(|v| {
            let mut vals = v.range.values();
            let mut front: Vec<Value> = hint
                .iter()
                .filter(|(n, _)| *n == v.name)
                .map(|(_, x)| x.clone())
                .collect();
            front.extend(prefer.iter().filter_map(|a| a.get(&v.name).cloned()));
            for f in front.into_iter().rev() {
                if let Some(p) = vals.iter().position(|x| *x == f) {
                    let x = vals.remove(p);
                    vals.insert(0, x);
                }
            }
            vals
        })
        .collect();
    let names = m.signature().endo_names().clone();
    let mut digits = vec![0usize; vars.len()];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let values = digits.iter().zip(&orders).map(|(&d, o)| o[d].clone()).collect();
        done = true;
        for (d, o) in digits.iter_mut().zip(&orders).rev() {
            *d += 1;
            if *d < o.len() {
                done = false;
                break;
            }
            *d = 0;
        }
        Some(Assignment::new(names.clone(), values))
    })
}

fn column(names: &[String], var: &str) -> usize {
    names.iter().position(|n| n == var).expect("observable validated")
}

/// Compares `s1(i)` with `C2(i·k)` for `i ≥ 1` until the joint period is
/// exhausted; returns the first divergence.
fn compare(
    s1: &PeriodicSeq,
    stepper: &mut Stepper,
    cols1: &[usize],
    cols2: &[usize],
    obs: &[String],
    k: usize,
) -> Result<Option<Divergence>, EquivError> {
    let mut i = 1usize;
    loop {
        if let Some((x2, y2)) = stepper.shape() {
            let horizon = s1.prefix_len().max(x2.div_ceil(k)) + lcm(s1.loop_len(), y2 / gcd(k, y2));
            if i > horizon {
                return Ok(None);
            }
        }
        let a = s1.index(i).values();
        let b = stepper.state(i * k)?;
        for ((&c1, &c2), name) in cols1.iter().zip(cols2).zip(obs) {
            if a[c1] != b[c2] {
                return Ok(Some(Divergence {
                    index: i,
                    variable: name.clone(),
                    left: a[c1].clone(),
                    right: b[c2].clone(),
                }));
            }
        }
        i += 1;
    }
}

enum Search {
    Found(Assignment),
    Missing {
        closest: Assignment,
        divergence: Divergence,
    },
}

/// Looks for `v2` making `(m2, int·k, ctx, v2)` match `(m1, int, ctx, v1)`.
#[allow(clippy::too_many_arguments)]
fn search(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    int: &Intervention,
    ctx: &PeriodicSeq,
    v1: &Assignment,
    k: usize,
    hint: &[(String, Value)],
) -> Result<Search, EquivError> {
    let sc1 = Scenario::new(m1.clone(), ctx.clone(), v1.clone())?;
    let s1 = periodic_computation(&sc1, int)?.seq;
    let int2 = int.scaled(k);
    let cols1: Vec<usize> = obs
        .names
        .iter()
        .map(|n| column(m1.signature().endo_names(), n))
        .collect();
    let cols2: Vec<usize> = obs
        .names
        .iter()
        .map(|n| column(m2.signature().endo_names(), n))
        .collect();
    let mut best: Option<(Assignment, Divergence)> = None;
    for v2 in candidates(m2, &[v1], hint) {
        let sc2 = Scenario::new(m2.clone(), ctx.clone(), v2.clone())?;
        let mut stepper = Stepper::new(&sc2, &int2)?;
        match compare(&s1, &mut stepper, &cols1, &cols2, &obs.names, k)? {
            None => return Ok(Search::Found(v2)),
            Some(d) => {
                if best.as_ref().is_none_or(|(_, b)| d.index > b.index) {
                    best = Some((v2, d));
                }
            }
        }
    }
    let (closest, divergence) = best.expect("every model has at least one initial assignment");
    Ok(Search::Missing { closest, divergence })
}

/// The first `v2` whose computation under `int` matches that of
/// `(m1, ctx, v1)` on the observables at every index `i ≥ 1`.
pub fn check_equiv_instance(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    int: &Intervention,
    ctx: &PeriodicSeq,
    v1: &Assignment,
) -> Result<Option<Assignment>, EquivError> {
    check_compatible(m1, m2)?;
    check_int(int, obs)?;
    Ok(match search(m1, m2, obs, int, ctx, v1, 1, &[])? {
        Search::Found(v2) => Some(v2),
        Search::Missing { .. } => None,
    })
}

/// Rescaled counterpart of [`check_equiv_instance`]: `m2` runs under the
/// intervention scaled by `k` and its step `i·k` is compared with step `i`.
pub fn check_rescaled_instance(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    k: usize,
    int: &Intervention,
    ctx: &PeriodicSeq,
    v1: &Assignment,
) -> Result<Option<Assignment>, EquivError> {
    check_compatible(m1, m2)?;
    check_int(int, obs)?;
    if k == 0 {
        return Err(EquivError::BadConfig("rescaling factor must be positive".into()));
    }
    Ok(match search(m1, m2, obs, int, ctx, v1, k, &[])? {
        Search::Found(v2) => Some(v2),
        Search::Missing { .. } => None,
    })
}

fn random_value(rng: &mut ChaCha8Rng, m: &Model, kind: VarKind, i: usize) -> Value {
    let r = &m.signature().vars(kind)[i].range;
    r.value_at(rng.gen_range(0..r.len()))
}

fn random_assignment(rng: &mut ChaCha8Rng, m: &Model, kind: VarKind) -> Assignment {
    let n = m.signature().vars(kind).len();
    let values = (0..n).map(|i| random_value(rng, m, kind, i)).collect();
    let names = match kind {
        VarKind::Exogenous => m.signature().exo_names(),
        VarKind::Endogenous => m.signature().endo_names(),
    };
    Assignment::new(names.clone(), values)
}

struct Sample {
    int: Intervention,
    ctx: PeriodicSeq,
    v1: Assignment,
    v2: Assignment,
}

fn draw(m1: &Model, m2: &Model, obs: &ObservableSet, cfg: &SamplerConfig, index: usize) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let size = rng.gen_range(0..=cfg.max_int_size);
    let mut entries: Vec<(String, usize, Value)> = Vec::new();
    for _ in 0..size {
        let var = &obs.names[rng.gen_range(0..obs.names.len())];
        let time = rng.gen_range(0..=cfg.max_time);
        let (_, i) = m1.signature().lookup(var).expect("observable");
        let value = random_value(&mut rng, m1, VarKind::Endogenous, i);
        if !entries.iter().any(|(v, t, _)| v == var && *t == time) {
            entries.push((var.clone(), time, value));
        }
    }
    let int = Intervention::new(entries).expect("duplicates skipped");
    let ctx = if m1.signature().exogenous().is_empty() {
        empty_context()
    } else {
        let p = rng.gen_range(0..=cfg.max_prefix);
        let l = rng.gen_range(1..=cfg.max_loop);
        let prefix = (0..p)
            .map(|_| random_assignment(&mut rng, m1, VarKind::Exogenous))
            .collect();
        let cycle = (0..l)
            .map(|_| random_assignment(&mut rng, m1, VarKind::Exogenous))
            .collect();
        PeriodicSeq::new(prefix, cycle).expect("uniform and non-empty")
    };
    let v1 = random_assignment(&mut rng, m1, VarKind::Endogenous);
    let v2 = random_assignment(&mut rng, m2, VarKind::Endogenous);
    Sample { int, ctx, v1, v2 }
}

fn run_tests(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    k: Option<usize>,
    cfg: &SamplerConfig,
) -> Result<EquivVerdict, EquivError> {
    check_compatible(m1, m2)?;
    cfg.validate()?;
    let mut instances = 0;
    for index in 0..cfg.samples {
        let s = draw(m1, m2, obs, cfg, index);
        let mut runs = vec![(Direction::Forward, m1, m2, &s.v1)];
        if k.is_none() {
            runs.push((Direction::Backward, m2, m1, &s.v2));
        }
        for (direction, a, b, given) in runs {
            instances += 1;
            let hint: &[(String, Value)] = if direction == Direction::Forward {
                &cfg.hint
            } else {
                &[]
            };
            if let Search::Missing { closest, divergence } =
                search(a, b, obs, &s.int, &s.ctx, given, k.unwrap_or(1), hint)?
            {
                return Ok(EquivVerdict::Counterexample(Box::new(Counterexample {
                    direction,
                    intervention: s.int.clone(),
                    context: s.ctx.clone(),
                    given: given.clone(),
                    closest,
                    index: divergence.index,
                    variable: divergence.variable,
                    expected: divergence.left,
                    found: divergence.right,
                })));
            }
        }
    }
    Ok(EquivVerdict::NoCounterexampleFound { instances })
}

/// Samples instances and checks both directions of temporal equivalence.
pub fn test_model_equivalence(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    cfg: &SamplerConfig,
) -> Result<EquivVerdict, EquivError> {
    run_tests(m1, m2, obs, None, cfg)
}

/// Samples instances and checks that `m2` rescalably matches `m1` with
/// coefficient `k`.
pub fn test_rescalable_equivalence(
    m1: &Arc<Model>,
    m2: &Arc<Model>,
    obs: &ObservableSet,
    k: usize,
    cfg: &SamplerConfig,
) -> Result<EquivVerdict, EquivError> {
    if k == 0 {
        return Err(EquivError::BadConfig("rescaling factor must be positive".into()));
    }
    run_tests(m1, m2, obs, Some(k), cfg)
}

impl Counterexample {
    /// Re-runs the recorded instance with `closest` and returns the first
    /// divergence (`None` would mean the record is not genuine).
    pub fn replay(
        &self,
        m1: &Arc<Model>,
        m2: &Arc<Model>,
        obs: &ObservableSet,
        k: usize,
    ) -> Result<Option<Divergence>, EquivError> {
        let (a, b) = match self.direction {
            Direction::Forward => (m1, m2),
            Direction::Backward => (m2, m1),
        };
        let s1 = periodic_computation(
            &Scenario::new(a.clone(), self.context.clone(), self.given.clone())?,
            &self.intervention,
        )?
        .seq;
        let s2 = periodic_computation(
            &Scenario::new(b.clone(), self.context.clone(), self.closest.clone())?,
            &self.intervention.scaled(k),
        )?
        .seq
        .stepped(k)
        .expect("k is positive");
        Ok(crate::trace::first_divergence(&s1, &s2, obs.names(), false).expect("observables validated"))
    }
}
