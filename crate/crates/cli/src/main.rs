use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use axcheck::axioms::{violation, ALL_AXIOMS};
use axcheck::checker::{
    check_irredundant_pair, check_universal_convergence, clam_demonstration, clam_model,
    Convergence, Irredundance,
};
use axcheck::execution::{check_well_formed, parse_witness, render_execution};
use axcheck::models::{catalog, satisfies, taxonomy};
use axcheck::semantics::{check_result_validity, check_valid, result_violation};
use axcheck::simulator::{
    clam_witness, parse_script, scripted_run, simulate, Partition, Protocol, SimConfig,
};
use axcheck::{
    check_existential, lookup, model, parse_history, Axiom, Budget, DataTypeSpec, History,
    ModelSpec, Verdict,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const SAT: u8 = 0;
const UNSAT: u8 = 1;
const UNKNOWN: u8 = 2;
const INPUT_ERROR: u8 = 3;

/// Checks histories of replicated objects against axiomatic consistency models.
///
/// Exit status: 0 satisfied, 1 unsatisfiable, 2 unknown (budget exhausted), 3 input error.
#[derive(Parser)]
#[command(name = "axcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a valid execution of a history that satisfies a model.
    Check(CheckArgs),
    /// Evaluate every axiom on an explicit execution.
    Eval(EvalArgs),
    /// Decide whether every valid execution of a history is convergent.
    Convergence(ConvergenceArgs),
    /// Decide whether a history demonstrates that two updates form an irredundant pair.
    ///
    /// The verdict concerns the given history only. A negative answer means this
    /// witness does not demonstrate irredundance, not that the pair is redundant.
    Irredundant(IrredundantArgs),
    /// Run a replica protocol and dump its history and ground-truth execution.
    Simulate(SimulateArgs),
    /// Print the strength taxonomy of models and axioms.
    Taxonomy(TaxonomyArgs),
    /// Generate a witness history for a scenario and check it.
    Witness(WitnessArgs),
}

#[derive(Args)]
struct BudgetArg {
    /// Search limits, e.g. `events=12,nodes=10000000,time=60s`.
    #[arg(long, env = "AXCHECK_BUDGET")]
    budget: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeMode {
    /// Require visible events to complete before the viewer starts.
    Lc,
    None,
}

#[derive(Args)]
struct CheckArgs {
    history: PathBuf,
    /// Data type, e.g. `register`, `queue`, `barrier[2]`.
    #[arg(long = "type")]
    data_type: String,
    /// Catalog model; `none` for no axioms.
    #[arg(long, default_value = "none")]
    model: String,
    /// Extra axioms, comma separated.
    #[arg(long, value_delimiter = ',')]
    axioms: Vec<String>,
    #[arg(long, value_enum, default_value = "none")]
    time: TimeMode,
    #[command(flatten)]
    budget: BudgetArg,
    /// Write the satisfying execution to this file instead of stdout.
    #[arg(long)]
    emit_witness: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    witness: PathBuf,
    #[arg(long = "type")]
    data_type: String,
}

#[derive(Args)]
struct ConvergenceArgs {
    history: PathBuf,
    #[arg(long = "type")]
    data_type: String,
    /// Restrict to executions satisfying this model.
    #[arg(long, default_value = "none")]
    model: String,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct IrredundantArgs {
    history: PathBuf,
    #[arg(long = "type")]
    data_type: String,
    /// The two update events, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pair: Vec<String>,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "crdt_counter")]
    protocol: String,
    /// Replicated type for `replay_store` and `prefix_store`.
    #[arg(long = "type")]
    data_type: Option<String>,
    #[arg(long, default_value_t = 3)]
    processes: usize,
    /// Operations per process.
    #[arg(long, default_value_t = 3)]
    ops: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `pairs@start..end`, where pairs is `*` or a list like `0|1,1|2`. Repeatable.
    #[arg(long)]
    partition: Vec<String>,
    /// Replay an explicit schedule instead of a random one.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Directory for `history.hist` and `trace.exec`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TaxonomyArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    /// Two partitioned processes, one update and one query each.
    Clam,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long = "type")]
    data_type: String,
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// Write the witness history here as well.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArg,
}

/// Line-delimited `key=value` output.
#[derive(Default)]
struct Report {
    lines: Vec<String>,
    body: Option<String>,
}

impl Report {
    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}={value}"));
    }

    fn print(&self) {
        let mut out = io::stdout().lock();
        for l in &self.lines {
            let _ = writeln!(out, "{l}");
        }
        if let Some(b) = &self.body {
            let _ = write!(out, "\n{b}");
        }
    }
}

fn parse_budget(arg: &BudgetArg) -> Result<Budget> {
    let mut b = Budget::default();
    let Some(spec) = &arg.budget else {
        return Ok(b);
    };
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad budget entry '{part}'"))?;
        match k.trim() {
            "events" => {
                b.max_events = v
                    .trim()
                    .parse()
                    .with_context(|| format!("bad event limit '{v}'"))?
            }
            "nodes" => {
                b.max_nodes = v
                    .trim()
                    .parse()
                    .with_context(|| format!("bad node limit '{v}'"))?
            }
            "time" => b.max_time = parse_duration(v.trim())?,
            other => bail!("unknown budget key '{other}'"),
        }
    }
    Ok(b)
}

fn parse_duration(s: &str) -> Result<Duration> {
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 0.001)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.parse().with_context(|| format!("bad duration '{s}'"))?;
    Ok(Duration::from_secs_f64(v * scale))
}

fn budget_line(b: &Budget) -> String {
    format!(
        "events:{},nodes:{},time:{}s",
        b.max_events,
        b.max_nodes,
        b.max_time.as_secs_f64()
    )
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_history(path: &Path) -> Result<History> {
    parse_history(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn data_type(name: &str) -> Result<DataTypeSpec> {
    Ok(lookup(name)?)
}

fn named_model(name: &str) -> Result<ModelSpec> {
    match name.trim() {
        "none" | "" => Ok(ModelSpec::custom([])),
        "clam" => Ok(clam_model()),
        n => model(n).ok_or_else(|| anyhow!("unknown model '{n}'")),
    }
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Satisfied(_) => SAT,
        Verdict::Unsatisfiable => UNSAT,
        Verdict::Unknown(_) => UNKNOWN,
    }
}

fn put_verdict(r: &mut Report, v: &Verdict) {
    r.put("verdict", v);
    if let Verdict::Unknown(why) = v {
        r.put("reason", why);
    }
}

fn cmd_check(a: &CheckArgs, r: &mut Report) -> Result<u8> {
    let h = load_history(&a.history)?;
    let dt = data_type(&a.data_type)?;
    let m = named_model(&a.model)?;
    let mut extra: Vec<Axiom> = a
        .axioms
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    if let TimeMode::Lc = a.time {
        extra.push(Axiom::VisLc);
    }
    let budget = parse_budget(&a.budget)?;
    let m = m.with(&extra);
    r.put("command", "check");
    r.put("type", dt);
    r.put("model", &m);
    r.put(
        "axioms",
        m.axioms
            .iter()
            .map(|a| a.tag())
            .collect::<Vec<_>>()
            .join(","),
    );
    r.put("events", h.len());
    r.put("budget", budget_line(&budget));
    let start = Instant::now();
    let v = check_existential(&h, &dt, &m, &[], &budget)?;
    r.put("elapsed_ms", start.elapsed().as_millis());
    put_verdict(r, &v);
    if let Some(w) = v.witness() {
        let text = render_execution(w);
        match &a.emit_witness {
            Some(path) => {
                fs::write(path, &text)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                r.put("witness", path.display());
            }
            None => r.body = Some(text),
        }
    }
    Ok(verdict_code(&v))
}

fn cmd_eval(a: &EvalArgs, r: &mut Report) -> Result<u8> {
    let w =
        parse_witness(&read(&a.witness)?).with_context(|| format!("in {}", a.witness.display()))?;
    let e = &w.execution;
    let dt = data_type(&a.data_type)?;
    dt.check_history(e.history())?;
    r.put("command", "eval");
    r.put("type", dt);
    r.put("events", e.len());
    r.put("valid", check_valid(e, &dt));
    r.put("well_formed", check_well_formed(e));
    r.put("result_validity", check_result_validity(e, &dt));
    let mut violations = Vec::new();
    if let Some((o, want)) = result_violation(e, &dt) {
        let want = want.map_or("undefined".to_string(), |v| v.to_string());
        violations.push(format!("violation.result=({}) expected {want}", e.id(o)));
    }
    for ax in ALL_AXIOMS {
        match violation(ax, e) {
            Ok(None) => r.put(ax.tag(), true),
            Ok(Some(v)) => {
                r.put(ax.tag(), false);
                violations.push(format!("violation.{}={v}", ax.tag()));
            }
            Err(_) => r.put(ax.tag(), "n/a"),
        }
    }
    r.lines.extend(violations);
    for m in catalog() {
        r.put(&format!("model.{}", m.name), satisfies(&m, e));
    }
    Ok(SAT)
}

fn cmd_convergence(a: &ConvergenceArgs, r: &mut Report) -> Result<u8> {
    let h = load_history(&a.history)?;
    let dt = data_type(&a.data_type)?;
    let m = named_model(&a.model)?;
    let budget = parse_budget(&a.budget)?;
    r.put("command", "convergence");
    r.put("type", dt);
    r.put("model", &m);
    r.put("events", h.len());
    r.put("budget", budget_line(&budget));
    let start = Instant::now();
    let c = check_universal_convergence(&h, &dt, &m, &budget)?;
    r.put("elapsed_ms", start.elapsed().as_millis());
    Ok(match c {
        Convergence::Holds => {
            r.put("verdict", "convergent");
            SAT
        }
        Convergence::Violated(e) => {
            r.put("verdict", "not_convergent");
            r.body = Some(render_execution(&e));
            UNSAT
        }
        Convergence::Unknown(why) => {
            r.put("verdict", "unknown");
            r.put("reason", why);
            UNKNOWN
        }
    })
}

fn cmd_irredundant(a: &IrredundantArgs, r: &mut Report) -> Result<u8> {
    let h = load_history(&a.history)?;
    let dt = data_type(&a.data_type)?;
    let budget = parse_budget(&a.budget)?;
    let [x, y] = a.pair.as_slice() else {
        bail!("--pair takes exactly two event ids")
    };
    let idx = |id: &str| {
        h.index_of(id.trim())
            .ok_or_else(|| anyhow!("unknown event '{id}'"))
    };
    let (i, j) = (idx(x)?, idx(y)?);
    if h.process_of(i) == h.process_of(j) {
        bail!("events '{x}' and '{y}' belong to the same process");
    }
    r.put("command", "irredundant");
    r.put("type", dt);
    r.put("pair", format!("{x},{y}"));
    r.put("budget", budget_line(&budget));
    Ok(match check_irredundant_pair(&h, &dt, i, j, &budget)? {
        Irredundance::Irredundant => {
            r.put("verdict", "irredundant");
            SAT
        }
        Irredundance::Redundant(e) => {
            r.put("verdict", "not_demonstrated");
            r.body = Some(render_execution(&e));
            UNSAT
        }
        Irredundance::Vacuous => {
            r.put("verdict", "vacuous");
            UNSAT
        }
        Irredundance::Unknown(why) => {
            r.put("verdict", "unknown");
            r.put("reason", why);
            UNKNOWN
        }
    })
}

fn cmd_simulate(a: &SimulateArgs, r: &mut Report) -> Result<u8> {
    let mut protocol = Protocol::from_name(&a.protocol)?;
    if let Some(t) = &a.data_type {
        protocol = protocol.with_data_type(data_type(t)?)?;
    }
    let trace = match &a.script {
        Some(path) => scripted_run(protocol, &parse_script(&read(path)?)?)?,
        None => {
            let names: Vec<String> = (0..a.processes).map(|p| format!("p{p}")).collect();
            let partitions = a
                .partition
                .iter()
                .map(|p| Partition::parse(p, &names).map_err(|e| anyhow!(e)))
                .collect::<Result<_>>()?;
            let cfg = SimConfig {
                processes: a.processes,
                protocol,
                ops_per_process: a.ops,
                seed: a.seed,
                partitions,
                ..SimConfig::default()
            };
            simulate(&cfg)?
        }
    };
    let advertised = protocol.advertised_model();
    r.put("command", "simulate");
    r.put("protocol", protocol.name());
    r.put("type", trace.data_type());
    r.put("events", trace.history.len());
    r.put("messages", trace.deliveries.len());
    r.put("advertised_model", &advertised);
    r.put(
        "ground_truth_valid",
        check_valid(&trace.ground_truth, &trace.data_type()),
    );
    r.put(
        "ground_truth_satisfies",
        satisfies(&advertised, &trace.ground_truth),
    );
    for p in trace.history.processes() {
        r.put(&format!("deliveries.{p}"), trace.deliveries_at(p).join(","));
    }
    let (hist, exec) = trace.dump();
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let (hp, ep) = (dir.join("history.hist"), dir.join("trace.exec"));
            fs::write(&hp, hist).with_context(|| format!("cannot write {}", hp.display()))?;
            fs::write(&ep, exec).with_context(|| format!("cannot write {}", ep.display()))?;
            r.put("history", hp.display());
            r.put("trace", ep.display());
        }
        None => r.body = Some(exec),
    }
    Ok(SAT)
}

fn cmd_taxonomy(a: &TaxonomyArgs, r: &mut Report) -> Result<u8> {
    let text = taxonomy().render();
    match &a.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            r.put("command", "taxonomy");
            r.put("out", path.display());
        }
        None => {
            let _ = io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(SAT)
}

fn cmd_witness(a: &WitnessArgs, r: &mut Report) -> Result<u8> {
    let dt = data_type(&a.data_type)?;
    let budget = parse_budget(&a.budget)?;
    let Scenario::Clam = a.scenario;
    let h = clam_witness(dt)?;
    let text = h.to_string();
    if let Some(path) = &a.out {
        fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
        r.put("out", path.display());
    }
    let m = clam_model();
    r.put("command", "witness");
    r.put("scenario", "clam");
    r.put("type", dt);
    r.put(
        "axioms",
        m.axioms
            .iter()
            .map(|a| a.tag())
            .collect::<Vec<_>>()
            .join(","),
    );
    let v = clam_demonstration(&h, &dt, &budget)?;
    put_verdict(r, &v);
    r.body = Some(text);
    Ok(verdict_code(&v))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT_ERROR } else { SAT });
        }
    };
    let mut report = Report::default();
    let outcome = match &cli.command {
        Command::Check(a) => cmd_check(a, &mut report),
        Command::Eval(a) => cmd_eval(a, &mut report),
        Command::Convergence(a) => cmd_convergence(a, &mut report),
        Command::Irredundant(a) => cmd_irredundant(a, &mut report),
        Command::Simulate(a) => cmd_simulate(a, &mut report),
        Command::Taxonomy(a) => cmd_taxonomy(a, &mut report),
        Command::Witness(a) => cmd_witness(a, &mut report),
    };
    match outcome {
        Ok(code) => {
            report.print();
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
