//! Config-driven experiment runner around `stgia_core`.
//!
//! Every command is deterministic given its config and seed, and writes
//! only into the output directory, each file atomically.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or input data; exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running; exit code 2.
    #[error("{0}")]
    Runtime(stgia_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<stgia_core::Error> for CliError {
    fn from(e: stgia_core::Error) -> Self {
        use stgia_core::Error as E;
        match e {
            E::Config(_) | E::Input(_) | E::Parse { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
