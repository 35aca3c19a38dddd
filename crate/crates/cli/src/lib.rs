//! `robust-detect` command-line front end: JSON experiment configs in, CSV/JSON
//! result bundles with a hashed manifest out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Command, ExperimentConfig, SCHEMA_VERSION};
pub use error::{exit, CliError};
pub use run::{run, run_config, RunOptions, RunSummary, Status};

pub const THREADS_ENV: &str = "ROBUST_DETECT_THREADS";

/// Caps the global rayon pool at `ROBUST_DETECT_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure {n} threads: {e}")))
}
