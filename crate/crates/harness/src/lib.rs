//! Experiment driver for alpha-divergence mixture optimisation: TOML
//! configuration, seeded trial replication, metric aggregation, and CSV
//! reporting.

pub mod config;
pub mod driver;
pub mod report;

pub use config::{ExperimentConfig, Family, RawConfig, UpdateRule};
pub use driver::{init_state, run_trial, IterationRecord, TrialOutput};
pub use report::{log_mse, percentile, replicate, write_all, Report, TraceRow};
