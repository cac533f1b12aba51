use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maxmin_core::harness::{run, ExperimentKind, RunConfig};
use maxmin_core::Error;

/// Max-min multi-objective RL: exact solvers, LP oracle and learning agents.
#[derive(Parser)]
#[command(name = "maxmin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the scalarized objective over weights by cutting planes.
    SolveExact(Common),
    /// Solve the occupancy-measure max-min LP.
    SolveLp(Common),
    /// Train an agent over one or more seeds.
    Train(Common),
    /// Monte-Carlo evaluation of a fixed policy.
    Evaluate(Common),
    /// Max-min solutions under a sweep of reward scalings.
    ParetoSweep(Common),
    /// Fixed-weight and sample-count ablations of the proposed agent.
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Seed override; repeat for several seeds.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::SolveExact(c) => (ExperimentKind::SolveExact, c),
            Command::SolveLp(c) => (ExperimentKind::SolveLp, c),
            Command::Train(c) => (ExperimentKind::Train, c),
            Command::Evaluate(c) => (ExperimentKind::Evaluate, c),
            Command::ParetoSweep(c) => (ExperimentKind::ParetoSweep, c),
            Command::Ablate(c) => (ExperimentKind::Ablate, c),
        }
    }
}

fn load_config(path: &Path, kind: ExperimentKind, seeds: Vec<u64>) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    // The subcommand names the experiment, so the file may omit it.
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let kind_value = serde_json::to_value(kind)?;
    match obj.get("experiment") {
        Some(v) if *v != kind_value => {
            return Err(Error::Config(format!("config declares experiment {v}, subcommand is {kind_value}")));
        }
        _ => {
            obj.insert("experiment".into(), kind_value);
        }
    }
    let mut cfg = RunConfig::from_json(&value.to_string())?;
    if !seeds.is_empty() {
        cfg.seeds = seeds;
    }
    Ok(cfg)
}

fn execute(kind: ExperimentKind, common: Common) -> Result<(), Error> {
    let cfg = load_config(&common.config, kind, common.seeds)?;
    let outcome = run(&cfg, common.config.parent())?;
    outcome.write_to(&common.out)?;
    println!("{}", common.out.join("result.json").display());
    Ok(())
}

fn error_json(err: &Error) -> serde_json::Value {
    let (phase, seed) = match err {
        Error::Run { phase, seed, .. } => (Some(phase.clone()), *seed),
        _ => (None, None),
    };
    serde_json::json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "phase": phase,
            "seed": seed,
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = serde_json::json!({
                "error": { "kind": "usage", "message": e.to_string().trim(), "phase": null, "seed": null }
            });
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    let (kind, common) = cli.command.split();
    match execute(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::FAILURE
        }
    }
}
