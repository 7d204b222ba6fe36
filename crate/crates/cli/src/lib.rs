//! Reproducible experiment harness: configuration, seeded data studies and
//! the subcommands behind the `noisyctl` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod study;

use config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] noisyctl_core::Error),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::SolverFailure(_) | CliError::Core(noisyctl_core::Error::Solver(_)) => 3,
            CliError::Core(noisyctl_core::Error::InfeasibleContainment) => 3,
            _ => 1,
        }
    }
}
