//! Configuration-driven experiments on top of the `evlhts` library.
//!
//! One experiment runs per invocation. It writes `summary.json`, `data.csv`
//! and a long-format `plot.csv`, and passes only if every declared tolerance
//! band holds.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::Config;
pub use error::CliError;
pub use report::Report;
pub use runner::{run, EXPERIMENTS};

/// Runs an experiment on a dedicated pool of `threads` workers (0 lets the
/// pool pick).
pub fn run_with_threads(experiment: &str, cfg: &Config, threads: usize) -> Result<Report, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Output(e.to_string()))?;
    pool.install(|| run(experiment, cfg))
}
