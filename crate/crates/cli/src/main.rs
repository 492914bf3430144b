use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Position-aware neural re-ranking: train, score, re-rank and evaluate.
#[derive(Debug, Parser)]
#[command(name = "pacrr", version, about)]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct ScorerArgs {
    /// Scorer name: pacrr, overlap or constant.
    #[arg(long)]
    scorer: Option<String>,

    /// Model checkpoint for the pacrr scorer.
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Run file to use instead of the configured one.
    #[arg(long)]
    run: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and keep the checkpoint with the best validation ERR@k.
    Train,
    /// Re-rank a run and report metrics before and after.
    Rerank(ScorerArgs),
    /// Score every document of a run.
    Score(ScorerArgs),
    /// Evaluate a run file.
    Eval {
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Accuracy on judged document pairs, grouped by merged label.
    Pairacc(ScorerArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck,
    /// Generate a synthetic benchmark with planted relevance.
    Synth {
        #[arg(long, default_value_t = 500)]
        docs: usize,
        #[arg(long, default_value_t = 30)]
        train_queries: usize,
        #[arg(long, default_value_t = 10)]
        validation_queries: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                commands::EXIT_USAGE
            } else {
                commands::EXIT_DATA
            })
        }
    }
}
