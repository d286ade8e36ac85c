//! Experiment runner: configuration, training loop, trace files, optimizer
//! comparisons, learning-rate sweeps and the verification report.

mod compare;
mod config;
mod experiment;
mod trace;
mod verify;

pub use compare::{log_grid, run_comparison, run_sweep, ComparisonReport, SweepEntry, SweepReport};
pub use config::{
    resolve_mnist_dir, ExperimentConfig, OptimizerSpec, ProblemSpec, StepperConfig, StepperName,
    DATA_DIR_ENV,
};
pub use experiment::{
    run_experiment, run_on_problem, version_string, Fnv1a, RunStatus, RunSummary,
};
pub use trace::{write_trace, TraceRow, TRACE_COLUMNS};
pub use verify::{run_verify, VerifyOutcome};
