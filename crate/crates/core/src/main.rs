use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use chainsched::bench::{bench, write_csv, BenchConfig};
use chainsched::coloring::{find_with, FindOptions};
use chainsched::error::Error;
use chainsched::feasibility::{decide, Feasibility};
use chainsched::gen::{generate, GenSpec, IntervalModel, PeriodMix};
use chainsched::model::{InstanceFile, Normalized, PeriodPolicy};
use chainsched::oracle::{brute_force, OracleOutcome, DEFAULT_NODE_BUDGET};
use chainsched::schedule::{
    emit_gcl, render_document, synthesize, GanttFormat, Schedule, ScheduleDocument, FORMAT_VERSION,
};
use chainsched::validator::validate_document;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_UNDECIDED: u8 = 4;

/// No-wait scheduling of periodic streams on a daisy chain of switches.
///
/// Exit codes: 0 success or feasible, 1 usage or input error, 2 infeasible,
/// 3 validation failure, 4 oracle budget exhausted.
#[derive(Parser)]
#[command(name = "chainsched", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Version of the JSON formats to read and write.
    #[arg(long, global = true, default_value_t = FORMAT_VERSION)]
    format_version: u32,
    /// Treatment of periods that are not powers of two.
    #[arg(long, global = true, value_enum, default_value_t = Policy::RoundDown)]
    period_policy: Policy,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Reject,
    RoundDown,
    RoundNearest,
}

impl From<Policy> for PeriodPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Reject => PeriodPolicy::Reject,
            Policy::RoundDown => PeriodPolicy::RoundDown,
            Policy::RoundNearest => PeriodPolicy::RoundNearest,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Uniform,
    Hub,
}

impl From<Model> for IntervalModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Uniform => IntervalModel::Uniform,
            Model::Hub => IntervalModel::HubBiased,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Decide feasibility; prints the verdict and an overloaded link if any.
    Check { instance: PathBuf },
    /// Compute a schedule for both directions.
    Schedule(ScheduleArgs),
    /// Audit a schedule against its instance.
    Validate {
        instance: PathBuf,
        schedule: PathBuf,
    },
    /// Exhaustive search. Exponential time; for small instances only.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Generate a random instance.
    Gen(GenArgs),
    /// Time the pipeline on generated instances of doubling size.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    instance: PathBuf,
    /// Schedule output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gantt chart output file.
    #[arg(long)]
    gantt: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Gate control list output file.
    #[arg(long)]
    gcl: Option<PathBuf>,
    /// Layer assignment output file.
    #[arg(long)]
    emit_coloring: Option<PathBuf>,
    /// Solve independent sub-problems on several threads.
    #[arg(long)]
    parallel: bool,
    /// Print per-level recursion statistics to stderr.
    #[arg(long)]
    trace: bool,
    /// Spell out every hop's transmission slot.
    #[arg(long)]
    with_hops: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    switches: u32,
    #[arg(long)]
    streams: usize,
    /// Period exponents with optional weights, e.g. `0,1,2` or `3:2,4:1`.
    #[arg(long, default_value = "0,1,2,3")]
    periods: String,
    #[arg(long, value_enum, default_value_t = Model::Hub)]
    model: Model,
    /// Redraw streams until the instance is feasible.
    #[arg(long)]
    feasible_only: bool,
    /// Draws allowed per stream with --feasible-only.
    #[arg(long, default_value_t = 1000)]
    max_attempts: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 8000)]
    max_streams: usize,
    #[arg(long, default_value_t = 1000)]
    min_streams: usize,
    #[arg(long, default_value_t = 32)]
    switches: u32,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9,10")]
    periods: String,
    #[arg(long, value_enum, default_value_t = Model::Hub)]
    model: Model,
    #[arg(long, default_value_t = 1000)]
    max_attempts: u64,
    #[arg(long)]
    parallel: bool,
    /// CSV output file (stdout if absent).
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    if cli.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormatVersion(cli.format_version));
    }
    let policy = PeriodPolicy::from(cli.period_policy);
    match cli.command {
        Command::Check { instance } => check(&load(&instance, policy)?),
        Command::Schedule(args) => schedule(&load(&args.instance, policy)?, &args),
        Command::Validate { instance, schedule } => {
            let normalized = load(&instance, policy)?;
            let doc =
                ScheduleDocument::from_json(&read(&schedule)?, normalized.topology().switches())?;
            let report = validate_document(&doc, &normalized)?;
            let mut out = serde_json::to_value(&report)?;
            out.as_object_mut()
                .unwrap()
                .insert("format_version".into(), json!(FORMAT_VERSION));
            emit(None, &pretty(&out)?)?;
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_INVALID
            })
        }
        Command::Oracle { instance, budget } => oracle(&load(&instance, policy)?, budget),
        Command::Gen(args) => {
            let mut spec = GenSpec::new(
                args.switches,
                args.streams,
                args.periods.parse::<PeriodMix>()?,
            );
            spec.model = args.model.into();
            spec.seed = cli.seed;
            spec.feasible_only = args.feasible_only;
            spec.max_attempts = args.max_attempts;
            let mut text = generate(&spec)?.to_json_pretty()?;
            text.push('\n');
            emit(args.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Bench(args) => {
            let config = BenchConfig {
                min_streams: args.min_streams,
                max_streams: args.max_streams,
                switches: args.switches,
                period_exponents: args.periods.parse()?,
                model: args.model.into(),
                seed: cli.seed,
                repeats: args.repeats,
                warmup: args.warmup,
                parallel: args.parallel,
                max_attempts: args.max_attempts,
            };
            let rows = bench(&config)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(args.csv.as_deref(), &String::from_utf8_lossy(&buf))?;
            Ok(EXIT_OK)
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load(path: &Path, policy: PeriodPolicy) -> Result<Normalized, Error> {
    InstanceFile::from_json(&read(path)?)?.normalize(policy)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) if p.as_os_str() != "-" => fs::write(p, text)?,
        _ => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty(value: &Value) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// First overloaded link over both directions, in physical terms.
fn witness(normalized: &Normalized) -> Option<Value> {
    let topology = normalized.topology();
    normalized
        .directions()
        .into_iter()
        .find_map(|inst| match decide(inst) {
            Feasibility::Feasible => None,
            Feasibility::Infeasible {
                link,
                load,
                capacity,
            } => Some(json!({
                "direction": inst.direction(),
                "link": topology.physical_link(inst.direction(), link),
                "port": topology.port(inst.direction(), link).to_string(),
                "load": load,
                "capacity": capacity,
            })),
        })
}

fn check(normalized: &Normalized) -> Result<u8, Error> {
    let w = witness(normalized);
    let mut out = Map::new();
    out.insert("format_version".into(), json!(FORMAT_VERSION));
    out.insert(
        "verdict".into(),
        json!(if w.is_some() {
            "infeasible"
        } else {
            "feasible"
        }),
    );
    if let Some(w) = &w {
        out.insert("witness".into(), w.clone());
    }
    emit(None, &pretty(&Value::Object(out))?)?;
    Ok(if w.is_some() {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    })
}

fn schedule(normalized: &Normalized, args: &ScheduleArgs) -> Result<u8, Error> {
    if let Some(w) = witness(normalized) {
        eprintln!("infeasible: {}", serde_json::to_string(&w)?);
        return Ok(EXIT_INFEASIBLE);
    }
    let options = FindOptions {
        parallel: args.parallel,
        trace: args.trace,
    };
    let mut schedules = Vec::new();
    let mut colorings = Vec::new();
    let mut traces = Vec::new();
    for inst in normalized.directions() {
        let (coloring, trace) = find_with(inst, &options)?;
        let mut s: Schedule = synthesize(&coloring, inst)?;
        if args.with_hops {
            s = s.with_hop_slots(inst);
        }
        schedules.push(s);
        colorings.push(json!({
            "direction": inst.direction(),
            "hyperperiod": inst.hyperperiod(),
            "layers": coloring.to_json_map(inst),
        }));
        if let Some(t) = trace {
            traces.push(json!({ "direction": inst.direction(), "trace": t }));
        }
    }
    let rtl = schedules.pop().expect("two directions");
    let ltr = schedules.pop().expect("two directions");
    let doc = ScheduleDocument::new(normalized, ltr, rtl);

    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    if let Some(path) = &args.gantt {
        let format = match args.format {
            Format::Text => GanttFormat::Text,
            Format::Svg => GanttFormat::Svg,
        };
        emit(Some(path), &render_document(&doc, normalized, format))?;
    }
    if let Some(path) = &args.gcl {
        emit(
            Some(path),
            &pretty(&serde_json::to_value(emit_gcl(&doc)?)?)?,
        )?;
    }
    if let Some(path) = &args.emit_coloring {
        let out = json!({ "format_version": FORMAT_VERSION, "colorings": colorings });
        emit(Some(path), &pretty(&out)?)?;
    }
    if args.trace {
        eprintln!("{}", serde_json::to_string_pretty(&traces)?);
    }
    Ok(EXIT_OK)
}

fn oracle(normalized: &Normalized, budget: u64) -> Result<u8, Error> {
    let mut results = Vec::new();
    let mut code = EXIT_OK;
    for inst in normalized.directions() {
        let outcome = brute_force(inst, budget)?;
        let mut entry = json!({ "direction": inst.direction(), "outcome": outcome.label() });
        match &outcome {
            OracleOutcome::Found(c) => {
                entry["layers"] = Value::Object(c.to_json_map(inst));
            }
            // one refuted direction settles the instance
            OracleOutcome::ExhaustedInfeasible => code = EXIT_INFEASIBLE,
            OracleOutcome::BudgetExceeded { nodes_explored } => {
                entry["nodes_explored"] = json!(nodes_explored);
                if code == EXIT_OK {
                    code = EXIT_UNDECIDED;
                }
            }
        }
        results.push(entry);
    }
    let outcome = match code {
        EXIT_OK => "found",
        EXIT_INFEASIBLE => "exhausted-infeasible",
        _ => "budget-exceeded",
    };
    let out =
        json!({ "format_version": FORMAT_VERSION, "outcome": outcome, "directions": results });
    emit(None, &pretty(&out)?)?;
    Ok(code)
}
