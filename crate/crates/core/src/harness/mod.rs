//! Experiment plumbing over `f64` instances: JSON instance files, the
//! Monte-Carlo runner, the strawman baselines and the per-item claim checks.

pub mod baselines;
pub mod claims;
pub mod experiment;
pub mod io;

pub use baselines::{baseline_prices, run_baseline, Baseline};
pub use claims::{run_claim_checks, ClaimKind, ClaimRow};
pub use experiment::{
    read_results_csv, run_experiment, run_trials, write_results_csv, Algorithm, ExperimentConfig,
    ResultRow, TrialOutcome,
};
pub use io::{Instance, Model};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "PROPHET_WORKERS";

/// Runs `f` on a pool sized by [`WORKERS_ENV`] (rayon's default when unset
/// or unparsable). Results never depend on the worker count.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0);
    match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
