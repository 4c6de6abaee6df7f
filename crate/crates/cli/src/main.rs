use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agreelab::error::Error;
use agreelab::experiment::{
    persist, report, run_experiment, series_rows, write_rows_csv, ExperimentConfig,
    ExperimentKind, OutputFormat,
};

#[derive(Parser)]
#[command(name = "agreelab")]
#[command(about = "Seeded experiment harness for multi-agent approximate-agreement simulations")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// JSON experiment config; unknown keys are rejected.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Row format override: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<u64>,
    /// Sampling-tree node cap override.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run agreement-protocol trials (config kind: agreement).
    Simulate(RunFlags),
    /// Common-prior construction statistics (config kind: construct_prior).
    ConstructPrior(RunFlags),
    /// Counting-bound table for bit-limited messages (kind: lower_bound).
    LowerBound(RunFlags),
    /// Bounded-agent sampling-tree runs (kind: bounded).
    Bounded(RunFlags),
    /// Rare-state miss frequencies (kind: needle).
    Needle(RunFlags),
    /// Expected-shortfall evaluation (kind: tail_risk).
    TailRisk(RunFlags),
    /// Tolerance-grid sweep over an agreement experiment (kind: sweep).
    Sweep(RunFlags),
    /// Aggregate stored rows into tables and plot-ready series.
    Report {
        /// Directory containing rows.csv or rows.json.
        #[arg(long)]
        results: PathBuf,
        /// Where to write the series file; defaults to stdout table only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ConfigInvalid(_)) => 2,
        Some(Error::ParameterOutOfRange(_)) => 2,
        Some(Error::BudgetExceeded(_)) => 3,
        Some(Error::MissingResults(_)) => 4,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(flags) => run(flags, expects_agreement),
        Command::ConstructPrior(flags) => run(flags, |k| matches!(k, ExperimentKind::ConstructPrior(_))),
        Command::LowerBound(flags) => run(flags, |k| matches!(k, ExperimentKind::LowerBound(_))),
        Command::Bounded(flags) => run(flags, |k| matches!(k, ExperimentKind::Bounded(_))),
        Command::Needle(flags) => run(flags, |k| matches!(k, ExperimentKind::Needle(_))),
        Command::TailRisk(flags) => run(flags, |k| matches!(k, ExperimentKind::TailRisk(_))),
        Command::Sweep(flags) => run(flags, |k| matches!(k, ExperimentKind::Sweep(_))),
        Command::Report { results, out } => {
            let rep = report(&results)?;
            print!("{}", rep.table);
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                write_rows_csv(&out.join("series.csv"), &series_rows(&rep))?;
                eprintln!("wrote {} series points to {}", rep.series.len(), out.display());
            }
            Ok(())
        }
    }
}

fn expects_agreement(kind: &ExperimentKind) -> bool {
    matches!(kind, ExperimentKind::Agreement(_))
}

fn run(flags: RunFlags, accepts: fn(&ExperimentKind) -> bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&flags.config)
        .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", flags.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if !accepts(&config.kind) {
        return Err(Error::ConfigInvalid(format!(
            "config kind does not match this subcommand (found {})",
            kind_name(&config.kind)
        ))
        .into());
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(trials) = flags.trials {
        config.trials = Some(trials);
    }
    if let Some(budget) = flags.budget {
        config.budget = Some(budget);
    }
    if let Some(format) = &flags.format {
        config.format = match format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(Error::ConfigInvalid(format!("unknown format {other:?}")).into())
            }
        };
    }
    if let Some(out) = &flags.out {
        config.out = Some(out.display().to_string());
    }
    config.validate()?;

    let artifacts = run_experiment(&config)?;
    println!("{}: {} rows", kind_name(&config.kind), artifacts.rows.len());
    if let Some(summary) = &artifacts.summary {
        println!("{}", serde_json::to_string_pretty(summary)?);
    }
    if let Some(out) = config.out.clone() {
        let out = PathBuf::from(out);
        persist(&out, &config, &artifacts)?;
        println!("wrote results under {}", out.display());
    }
    Ok(())
}

fn kind_name(kind: &ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Agreement(_) => "agreement",
        ExperimentKind::ConstructPrior(_) => "construct_prior",
        ExperimentKind::LowerBound(_) => "lower_bound",
        ExperimentKind::Bounded(_) => "bounded",
        ExperimentKind::Needle(_) => "needle",
        ExperimentKind::TailRisk(_) => "tail_risk",
        ExperimentKind::Sweep(_) => "sweep",
    }
}
