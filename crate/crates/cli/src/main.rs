use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgda_cli::commands::{self, Outcome};
use sgda_cli::{CliError, CliResult, RunConfig};

/// Motor-current fault diagnosis trained on healthy signals with synthesized
/// fault signatures.
#[derive(Debug, Parser)]
#[command(name = "sgda", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Replace the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides paths.output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override a config leaf, e.g. `model.max_epochs=50`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Print and save the fault-frequency table.
    Freqs,
    /// Generate synthetic signals and a manifest.
    Synth,
    /// Segment, transform and normalize healthy signals; freeze epoch datasets.
    Preprocess,
    /// Train a classifier on healthy signals with per-epoch augmentation.
    Train,
    /// Diagnose signals by segment-level majority vote.
    Diagnose {
        /// Signal CSVs; defaults to every signal in paths.input.
        signals: Vec<PathBuf>,
    },
    /// Score a model on a labeled manifest.
    Evaluate,
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let path = cli.config.ok_or_else(|| CliError::config("--config is required"))?;
    let mut overrides = cli.overrides;
    if let Some(out) = cli.out {
        let out = serde_json::to_string(&out.to_string_lossy()).map_err(CliError::config)?;
        overrides.push(format!("paths.output={out}"));
    }
    let cfg = RunConfig::load(&path, &overrides, cli.seed)?;
    match cli.verb {
        Verb::Freqs => commands::freqs(&cfg),
        Verb::Synth => commands::synth(&cfg),
        Verb::Preprocess => commands::preprocess(&cfg),
        Verb::Train => commands::train(&cfg),
        Verb::Diagnose { signals } => commands::diagnose(&cfg, &signals),
        Verb::Evaluate => commands::evaluate(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sgda: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
