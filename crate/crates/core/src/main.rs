use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use tsem::delays::{compile_to_onestep, periodic_delayed, run_delayed};
use tsem::doc::{
    CounterexampleDoc, DocError, LoadedModel, ModelDocument, NameMap, Report, ScenarioDocument, TraceDoc, Verdict,
};
use tsem::engine::{periodic_computation, run, EngineError, Intervention, InterventionError, Scenario};
use tsem::equivalence::{
    test_model_equivalence, test_rescalable_equivalence, EquivError, EquivVerdict, ObservableSet, SamplerConfig,
};
use tsem::logic::{parse_cpltl, CpltlChecker, LogicError};
use tsem::model::{Model, Value};
use tsem::trace::PeriodicSeq;

const USAGE: u8 = 2;
const INVALID: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tsem",
    version,
    about = "Simulate, check and compare temporal structural equation models"
)]
struct Cli {
    /// Include wall-clock time in JSON reports.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// Interventions, e.g. `ST@0:=1, BT@3:=0`.
    #[arg(long)]
    intervene: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the first N states of a computation.
    Simulate {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        steps: usize,
    },
    /// Print the normalized prefix and loop of a computation.
    Periodic {
        #[command(flatten)]
        sc: ScenarioArgs,
    },
    /// Decide a CPLTL formula at a time point. Exit 0 if true, 1 if false.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        at: usize,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        json: bool,
    },
    /// Search for a counterexample to (rescalable) equivalence of two models.
    Equiv {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        /// Comma-separated observable variables.
        #[arg(long, value_delimiter = ',')]
        observe: Vec<String>,
        #[arg(long)]
        rescale: Option<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        max_int_size: usize,
        #[arg(long, default_value_t = 6)]
        max_time: usize,
        #[arg(long, default_value_t = 3)]
        max_prefix: usize,
        #[arg(long, default_value_t = 3)]
        max_loop: usize,
        /// Values tried first for the matched model's initial state, e.g. `S=0`.
        #[arg(long, value_delimiter = ',')]
        v2_hint: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Compile a delayed model into an equivalent one-step model.
    CompileDelays {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// A message and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))
}

fn doc_failure(path: &Path, e: DocError) -> Failure {
    let code = if e.is_syntax() { USAGE } else { INVALID };
    Failure::new(code, format!("{}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<LoadedModel, Failure> {
    ModelDocument::parse(&read(path)?)
        .and_then(|d| d.load())
        .map_err(|e| doc_failure(path, e))
}

fn load_scenario(path: &Path, model: &LoadedModel) -> Result<(PeriodicSeq, tsem::model::Assignment), Failure> {
    ScenarioDocument::parse(&read(path)?)
        .and_then(|d| d.load(model.signature()))
        .map_err(|e| doc_failure(path, e))
}

fn intervention(spec: Option<&str>, model: &LoadedModel) -> Result<Intervention, Failure> {
    match spec {
        None => Ok(Intervention::empty()),
        Some(s) => Intervention::parse(s, model.signature()).map_err(|e| {
            let code = if matches!(e, InterventionError::Syntax(_)) {
                USAGE
            } else {
                INVALID
            };
            Failure::new(code, format!("--intervene: {e}"))
        }),
    }
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Intervention(InterventionError::Syntax(s)) => Failure::new(USAGE, s),
        e => Failure::new(INVALID, e),
    }
}

fn emit(report: Report, started: Instant, timing: bool, json: bool, text: impl FnOnce() -> String) -> u8 {
    let code = report.verdict.exit_code();
    if json {
        let mut report = report;
        if timing {
            report.stats.elapsed_ms = Some(started.elapsed().as_millis() as u64);
        }
        println!("{}", report.to_json());
    } else {
        print!("{}", text());
    }
    code
}

fn simulate(sc: &ScenarioArgs, steps: usize, started: Instant, timing: bool) -> Outcome {
    let model = load_model(&sc.model)?;
    let (ctx, init) = load_scenario(&sc.scenario, &model)?;
    let int = intervention(sc.intervene.as_deref(), &model)?;
    let trace = match &model {
        LoadedModel::OneStep(m) => {
            let scenario = Scenario::new(m.clone(), ctx, init).map_err(engine_failure)?;
            run(&scenario, &int, steps)
        }
        LoadedModel::Delayed(dm) => run_delayed(dm, &ctx, &init, &int, steps),
    }
    .map_err(engine_failure)?;
    let mut report = Report::new("simulate", Verdict::Bool(true));
    report.trace = Some(TraceDoc::finite(&trace));
    Ok(emit(report, started, timing, sc.json, || format!("{trace}")))
}

fn periodic(sc: &ScenarioArgs, started: Instant, timing: bool) -> Outcome {
    let model = load_model(&sc.model)?;
    let (ctx, init) = load_scenario(&sc.scenario, &model)?;
    let int = intervention(sc.intervene.as_deref(), &model)?;
    let seq = match &model {
        LoadedModel::OneStep(m) => {
            let scenario = Scenario::new(m.clone(), ctx, init).map_err(engine_failure)?;
            periodic_computation(&scenario, &int)
        }
        LoadedModel::Delayed(dm) => periodic_delayed(dm, &ctx, &init, &int),
    }
    .map_err(engine_failure)?
    .seq;
    let mut report = Report::new("periodic", Verdict::Bool(true));
    report.trace = Some(TraceDoc::periodic(&seq));
    report.stats.prefix_len = Some(seq.prefix_len());
    report.stats.loop_len = Some(seq.loop_len());
    Ok(emit(report, started, timing, sc.json, || {
        let mut out = String::from("prefix:\n");
        for (i, a) in seq.prefix().iter().enumerate() {
            out += &format!("  {i}: {a}\n");
        }
        out += "loop:\n";
        for (i, a) in seq.cycle().iter().enumerate() {
            out += &format!("  {}: {a}\n", seq.prefix_len() + i);
        }
        out += &format!("type: ({}, {})\n", seq.prefix_len(), seq.loop_len());
        out
    }))
}

fn logic_failure(e: LogicError) -> Failure {
    match e {
        LogicError::Syntax(s) => Failure::new(USAGE, format!("--formula: {s}")),
        LogicError::Engine(e) => engine_failure(e),
        e => Failure::new(INVALID, format!("--formula: {e}")),
    }
}

fn check(
    model: &Path,
    scenario: &Path,
    at: usize,
    formula: &str,
    json: bool,
    started: Instant,
    timing: bool,
) -> Outcome {
    let loaded = load_model(model)?;
    let (ctx, init) = load_scenario(scenario, &loaded)?;
    let f = parse_cpltl(formula, loaded.signature()).map_err(logic_failure)?;
    let sc = match &loaded {
        LoadedModel::OneStep(m) => Scenario::new(m.clone(), ctx, init),
        LoadedModel::Delayed(dm) => {
            let cm = compile_to_onestep(dm);
            let init = cm.lift_init(&init);
            Scenario::new(cm.model, ctx, init)
        }
    }
    .map_err(engine_failure)?;
    let verdict = CpltlChecker::new(sc).check(at, &f).map_err(logic_failure)?;
    let report = Report::new("check", Verdict::Bool(verdict));
    Ok(emit(report, started, timing, json, || format!("{verdict}\n")))
}

fn onestep(path: &Path) -> Result<Arc<Model>, Failure> {
    match load_model(path)? {
        LoadedModel::OneStep(m) => Ok(m),
        LoadedModel::Delayed(_) => Err(Failure::new(
            INVALID,
            format!(
                "{}: equivalence testing needs one-step models; run compile-delays first",
                path.display()
            ),
        )),
    }
}

fn parse_hint(items: &[String]) -> Result<Vec<(String, Value)>, Failure> {
    items
        .iter()
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Failure::new(USAGE, format!("--v2-hint: expected NAME=VALUE, found `{item}`")))?;
            let value = value.trim();
            let value = value
                .parse::<i64>()
                .map(Value::Int)
                .unwrap_or_else(|_| Value::from(value));
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

fn equiv_failure(e: EquivError) -> Failure {
    match e {
        EquivError::Engine(e) => engine_failure(e),
        e => Failure::new(INVALID, e),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let timing = cli.timing;
    let outcome =
        match &cli.command {
            Command::Simulate { sc, steps } => simulate(sc, *steps, started, timing),
            Command::Periodic { sc } => periodic(sc, started, timing),
            Command::Check {
                model,
                scenario,
                at,
                formula,
                json,
            } => check(model, scenario, *at, formula, *json, started, timing),
            Command::Equiv {
                model_a,
                model_b,
                observe,
                rescale,
                samples,
                seed,
                max_int_size,
                max_time,
                max_prefix,
                max_loop,
                v2_hint,
                json,
            } => (|| {
                let a = onestep(model_a)?;
                let b = onestep(model_b)?;
                let obs = ObservableSet::new(&a, &b, observe).map_err(equiv_failure)?;
                let cfg = SamplerConfig {
                    samples: *samples,
                    seed: *seed,
                    max_int_size: *max_int_size,
                    max_time: *max_time,
                    max_prefix: *max_prefix,
                    max_loop: *max_loop,
                    hint: parse_hint(v2_hint)?,
                };
                let verdict = match rescale {
                    Some(k) => test_rescalable_equivalence(&a, &b, &obs, *k, &cfg),
                    None => test_model_equivalence(&a, &b, &obs, &cfg),
                }
                .map_err(equiv_failure)?;
                let mut report;
                let text;
                match &verdict {
                    EquivVerdict::NoCounterexampleFound { instances } => {
                        report = Report::new("equiv", Verdict::no_counterexample());
                        report.stats.samples = Some(*instances);
                        text = format!("no counterexample found in {instances} instances\n");
                    }
                    EquivVerdict::Counterexample(cx) => {
                        report = Report::new("equiv", Verdict::Bool(false));
                        report.counterexample = Some(CounterexampleDoc::new(cx, *rescale));
                        text =
                            format!(
                        "counterexample ({})\n  intervention: {}\n  context: {}\n  given: {}\n  closest: {}\n  \
                         first divergence at {} on {}: expected {}, found {}\n",
                        cx.direction,
                        if cx.intervention.is_empty() { "none".to_string() } else { cx.intervention.to_string() },
                        cx.context,
                        cx.given,
                        cx.closest,
                        cx.index,
                        cx.variable,
                        cx.expected,
                        cx.found
                    );
                    }
                }
                Ok(emit(report, started, timing, *json, || text))
            })(),
            Command::CompileDelays { model, output, json } => (|| {
                let dm = match load_model(model)? {
                    LoadedModel::Delayed(dm) => dm,
                    LoadedModel::OneStep(_) => {
                        return Err(Failure::new(
                            INVALID,
                            format!("{}: not a delayed model", model.display()),
                        ))
                    }
                };
                let cm = compile_to_onestep(&dm);
                let doc = ModelDocument::from_model(&cm.model);
                let text = serde_json::to_string_pretty(&doc).expect("documents serialize") + "\n";
                let map = serde_json::to_string_pretty(&NameMap::new(&cm)).expect("maps serialize") + "\n";
                let mut map_path = output.clone().into_os_string();
                map_path.push(".map.json");
                for (path, body) in [(output.as_path(), &text), (Path::new(&map_path), &map)] {
                    std::fs::write(path, body).map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
                }
                let report = Report::new("compile-delays", Verdict::Bool(true));
                Ok(emit(report, started, timing, *json, || {
                    format!(
                        "wrote {} ({} chain variables) and {}\n",
                        output.display(),
                        cm.fresh.len(),
                        Path::new(&map_path).display()
                    )
                }))
            })(),
        };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
