//! Manifest-driven experiments over flat-file archives.

pub mod io;
mod manifest;
mod report;
mod run;

pub use manifest::{
    ArithmeticConfig, BenchConfig, ExperimentFamily, ExperimentManifest, FlipRateConfig, MimoConfig, OracleChoice,
    SCHEMA_VERSION,
};
pub use report::{budget_grid, summarize, BenchRow, Report};
pub use run::{
    bench_schedule, flip_rate_series, ground_truths, mimo_detector, oracle_method, run_experiment, solve_instances,
    BerRow, Checkpoint, FlipRateRow, FlipRateSummaryRow, RunOutcome, Stamp, CHECKPOINT_FILE, MANIFEST_FILE,
    STAMP_FILE,
};
