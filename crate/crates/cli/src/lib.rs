//! Experiment runner for the `pint-core` solvers: single runs, plan files, summaries and
//! record diagnostics, persisted as JSON records and versioned CSV tables.

pub mod commands;
pub mod output;
pub mod plan;
pub mod summary;

pub use commands::{execute, Cli};
pub use plan::{run_plan, ExperimentPlan, OutputOptions};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "PINT_PROB_WORKERS";

/// Size the global thread pool from [`WORKERS_ENV`], if set.
pub fn configure_workers() -> anyhow::Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got `{v}`"))?;
    anyhow::ensure!(n > 0, "{WORKERS_ENV} must be a positive integer");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}
