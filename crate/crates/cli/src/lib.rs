//! Experiment runner for the influence-matrix engine.

pub mod config;
pub mod error;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{Category, CliError, CliResult};
pub use runner::{entropy, oracle_check, run, RunOptions, RunReport};
