//! Command-line front end for the trust-network simulator: configs and
//! presets, single and ensemble runs, parameter sweeps, theory queries and
//! the mean-field oracle.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

use thiserror::Error;
use trustnet_core::meanfield::MeanFieldError;
use trustnet_core::RunError;

pub use config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("domain error: {0}")]
    Domain(MeanFieldError),
    #[error("mean-field iteration failed: {0}")]
    Oracle(MeanFieldError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 runtime failure, 2 config or domain error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Domain(_) => 2,
            _ => 1,
        }
    }
}

impl From<MeanFieldError> for CliError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::Domain { .. } | MeanFieldError::GridTooCoarse { .. } => CliError::Domain(e),
            other => CliError::Oracle(other),
        }
    }
}
