//! `ace`: run a scenario, replay or inspect a trace, manage declarative memory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ace_core::cognition::{CognitionEngine, ExternalEngine, RuleEngine};
use ace_core::layers::agent_model::DeclarativeStore;
use ace_core::messaging::{LayerId, MessageKind};
use ace_core::runtime::inspect::{inspect, Filters, View};
use ace_core::runtime::replay::{final_snapshot, replay};
use ace_core::runtime::{EndStatus, Machine, RunSpec};
use ace_core::sim::Scenario;

const CONFIG_ERROR: u8 = 2;
const RUNTIME_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "ace", version, about = "Layered cognitive agent runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under a constitution.
    Run(RunArgs),
    /// Re-execute a trace and check it line by line.
    Replay { trace: PathBuf },
    /// Print a filtered view of a trace.
    Inspect(InspectArgs),
    /// Declarative memory store.
    Memory {
        #[command(subcommand)]
        command: MemoryCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Cognition {
    Rule,
    External,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    constitution: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Cognition::Rule)]
    cognition: Cognition,
    #[arg(long, default_value_t = 500)]
    max_ticks: u64,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `key=value` setting override; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Declarative memory store (JSON lines).
    #[arg(long)]
    memory: Option<PathBuf>,
    /// One thread per layer. Traces are not comparable with sequential runs.
    #[arg(long)]
    concurrent: bool,
    /// Seconds to wait for the external engine.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Args)]
struct InspectArgs {
    trace: PathBuf,
    /// Envelopes sent by or addressed to this layer.
    #[arg(long)]
    layer: Option<LayerId>,
    /// Envelopes of this message kind.
    #[arg(long)]
    kind: Option<MessageKind>,
    /// First tick to include.
    #[arg(long)]
    from: Option<u64>,
    /// Last tick to include.
    #[arg(long)]
    to: Option<u64>,
    /// Directives, censors, halts, reboots and moral judgments.
    #[arg(long, group = "view")]
    interventions: bool,
    /// Roadmaps issued by the executive layer.
    #[arg(long, group = "view")]
    roadmaps: bool,
    /// Task selection, switching and deliberation records.
    #[arg(long, group = "view")]
    decisions: bool,
    /// Task outcome signals.
    #[arg(long, group = "view")]
    outcomes: bool,
}

#[derive(Subcommand)]
enum MemoryCommand {
    /// Add every .txt and .md file in a directory to the store.
    Add {
        dir: PathBuf,
        #[arg(long, default_value = "ace-memory.jsonl")]
        store: PathBuf,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("scenario {}", args.scenario.display()))
        .map_err(config)?;
    let constitution = read(&args.constitution).map_err(config)?;
    let memory = match &args.memory {
        Some(p) if !p.exists() => {
            return Err(config(anyhow::anyhow!("memory store {} does not exist", p.display())))
        }
        Some(p) => DeclarativeStore::load(p)
            .with_context(|| format!("memory store {}", p.display()))
            .map_err(config)?,
        None => DeclarativeStore::default(),
    };
    let engine: Arc<dyn CognitionEngine> = match args.cognition {
        Cognition::Rule => Arc::new(RuleEngine::new()),
        Cognition::External => {
            Arc::new(ExternalEngine::from_env(Duration::from_secs(args.timeout)).map_err(config)?)
        }
    };
    let spec = RunSpec {
        scenario,
        constitution,
        seed: args.seed,
        max_ticks: args.max_ticks,
        overrides: args.overrides,
        memory,
        concurrent: args.concurrent,
    };
    let mut machine = Machine::from_spec(&spec, engine).map_err(config)?;
    let status = machine.run();
    if let Some(path) = &args.trace {
        machine
            .write_trace(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(runtime)?;
    }
    let outcomes = machine
        .bus()
        .audit()
        .iter()
        .filter(|a| a.envelope.kind == MessageKind::OutcomeSignal)
        .filter(|a| a.envelope.source == LayerId::TaskProsecution.into())
        .count();
    println!(
        "{}: {status:?} after tick {}, {} envelopes, {outcomes} outcomes, battery {}",
        spec.scenario.name,
        machine.tick(),
        machine.bus().attempts(),
        machine.house().robot.battery
    );
    match (status, machine.failure()) {
        (EndStatus::Failure, Some(f)) => Err(runtime(anyhow::anyhow!(
            "{} failed at tick {}: {}",
            f.layer,
            f.tick,
            f.message
        ))),
        _ => Ok(()),
    }
}

fn replay_cmd(path: &Path) -> Result<(), Failure> {
    let text = read(path).map_err(config)?;
    let replayed = replay(&text).map_err(runtime)?;
    if let Some((layers, world)) = final_snapshot(&text) {
        if layers != replayed.snapshots || world != replayed.world {
            return Err(runtime(anyhow::anyhow!("replayed state differs from the recorded snapshot")));
        }
    }
    match replayed.status {
        Some(status) => println!("replayed {} lines: {status:?}", replayed.lines),
        None => println!("empty trace: default states"),
    }
    Ok(())
}

fn inspect_cmd(args: InspectArgs) -> Result<(), Failure> {
    let text = read(&args.trace).map_err(config)?;
    let view = if args.interventions {
        Some(View::Interventions)
    } else if args.roadmaps {
        Some(View::Roadmaps)
    } else if args.decisions {
        Some(View::Decisions)
    } else if args.outcomes {
        Some(View::Outcomes)
    } else {
        None
    };
    let filters = Filters {
        layer: args.layer,
        kind: args.kind,
        from: args.from,
        to: args.to,
        view,
    };
    let mut out = std::io::stdout().lock();
    for line in inspect(&text, &filters).map_err(runtime)? {
        match writeln!(out, "{line}") {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
            Err(e) => return Err(runtime(e)),
        }
    }
    Ok(())
}

fn memory_add(dir: &Path, store: &Path) -> Result<(), Failure> {
    let mut s = DeclarativeStore::load(store).map_err(config)?;
    let added = s.ingest_dir(dir).map_err(config)?;
    s.save(store).map_err(runtime)?;
    println!("added {added} documents to {} ({} total)", store.display(), s.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Replay { trace } => replay_cmd(&trace),
        Command::Inspect(args) => inspect_cmd(args),
        Command::Memory {
            command: MemoryCommand::Add { dir, store },
        } => memory_add(&dir, &store),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_FAILURE)
        }
    }
}
