use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use robust_detect_cli::{configure_threads, run, Command, RunOptions};

/// Minimax robust detection: least favorable distributions, detectors and sequential tests.
#[derive(Parser)]
#[command(name = "robust-detect", version)]
struct Args {
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure_threads().and_then(|()| {
        run(
            args.command,
            &args.config,
            &RunOptions {
                out: args.out,
                seed: args.seed,
                quiet: args.quiet,
            },
        )
    });
    match result {
        Ok(summary) => ExitCode::from(summary.exit_code()),
        Err(e) => {
            eprintln!("robust-detect: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
