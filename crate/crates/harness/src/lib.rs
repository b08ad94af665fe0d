//! Seeded, deterministic Monte Carlo experiments for the estimators in `catoni_core`.
//!
//! A run is a pure function of its [`ExperimentConfig`]: replicate `r` at sample
//! size `n` draws from its own counter-based stream, replicates run in parallel,
//! and results are reduced in replicate order.

pub mod config;
pub mod error;
pub mod mean_runs;
pub mod regression_runs;
pub mod report;
pub mod sim;
pub mod tails;

pub use config::{ExperimentConfig, Kind};
pub use error::{HarnessError, Result};
pub use report::{Cell, ReportTable};

pub use mean_runs::{run_be_mean, run_be_self, run_coverage, run_md};
pub use regression_runs::{run_regression_bound, run_regression_mdbe};
pub use tails::run_tail_bounds;

/// Dispatch on `config.kind` using the current rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<ReportTable> {
    match config.kind {
        Kind::BeMean => run_be_mean(config),
        Kind::BeSelf => run_be_self(config),
        Kind::MdMean | Kind::MdSelf => run_md(config),
        Kind::Coverage => run_coverage(config),
        Kind::RegressionBound => run_regression_bound(config),
        Kind::RegressionMdbe => run_regression_mdbe(config),
        Kind::TailBounds => run_tail_bounds(config),
    }
}

/// As [`run`] on a dedicated pool of `threads` workers (0 = machine parallelism).
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ReportTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Abort(format!("thread pool: {e}")))?;
    pool.install(|| run(config))
}
