//! Library surface of the experiment runner: configuration parsing and
//! the command implementations, kept separate from `main` so integration
//! tests can call them in-process.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
