//! Experiment driver for `aoi-core`: configuration files, the `solve`,
//! `sweep`, `landscape` and `simulate` commands, and their CSV output.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{ExperimentConfig, PolicyKind};
pub use error::CliError;
