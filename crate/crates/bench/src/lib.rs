//! Strategy comparison harness: Monte-Carlo runs, CSV reports and tables.

mod error;
pub mod experiment;
pub mod pipeline;
pub mod strategy;

pub use error::BenchError;
pub use experiment::{emit_tables, format_table, run_experiment, ExperimentConfig, ExperimentReport};
pub use pipeline::{run_once, RunResult};
pub use strategy::Strategy;
