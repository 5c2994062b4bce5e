//! `pulse`: run the tweet analytics pipeline from a JSON configuration.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pulse_core::neuralnet::NetError;
use pulse_core::Execution;

use commands::RunContext;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "pulse", version, about = "Tweet sentiment, word-frequency and party-classification pipeline")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus, cache it and print a summary.
    Ingest {
        /// Overrides the configured corpus path.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Tokenize, remove stop words and lemmatize.
    Preprocess,
    /// Score every tweet and export histograms and monthly timelines.
    Sentiment,
    /// Per-party (and per-year) word-frequency tables.
    Cloud,
    /// Balance, split and vectorize into bag-of-words datasets.
    Vectorize,
    /// Train the classifier.
    Train,
    /// Confusion matrices (per party and left/right) on a dataset split.
    Eval {
        /// Parameter file; defaults to the one written by `train`.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Leaning map JSON; defaults to the label-set leanings.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
        split: String,
    },
    /// Print a text report of the artifacts produced so far.
    Report,
}

fn build_context(cli: &Cli) -> anyhow::Result<RunContext> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(dir) = &cli.out_dir {
        config.paths.out_dir = Some(dir.clone());
    }
    match &cli.command {
        Command::Ingest { corpus: Some(c) } => config.paths.corpus = Some(c.clone()),
        Command::Eval { mapping: Some(m), .. } => config.paths.leaning_map = Some(m.clone()),
        _ => {}
    }
    config.validate()?;
    let seed = config.seed()?;
    let out = config.out_dir();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    Ok(RunContext { config, seed, out, exec })
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let ctx = build_context(cli)?;
    match &cli.command {
        Command::Ingest { .. } => commands::ingest(&ctx),
        Command::Preprocess => commands::preprocess(&ctx),
        Command::Sentiment => commands::sentiment(&ctx),
        Command::Cloud => commands::cloud(&ctx),
        Command::Vectorize => commands::vectorize(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Eval { params, split, .. } => commands::eval(&ctx, params.as_deref(), split),
        Command::Report => commands::report(&ctx),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<NetError>(),
            Some(NetError::Numerical | NetError::Divergence { .. })
        )
    });
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
