//! Experiment harness: TOML-configured sweeps, seeded parallel execution,
//! record persistence and the command-line interface.

pub mod cli;
pub mod config;
pub mod report;
pub mod runner;

pub use config::{Backend, DiscoveryConfig, ExperimentConfig, FeatureSource, MethodCell, WORKERS_ENV};
pub use report::{emit_report, read_records, summarize, write_records, Record, Summary};
pub use runner::{cell_seed, run_experiment, ExperimentReport};
