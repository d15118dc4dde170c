//! Command implementations behind the `nqs` binary: named experiments
//! with config files, seeded determinism, and CSV outputs plus JSON
//! metadata sidecars. Every command is a pure function of
//! (config, seed): re-running reproduces byte-identical CSV files.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("oracle size exceeded: {0}")]
    OracleSize(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for config errors, 3 for oracle-size errors,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::OracleSize(_) => 3,
            _ => 1,
        }
    }
}

impl From<nqs::NqsError> for CliError {
    fn from(e: nqs::NqsError) -> Self {
        match e {
            nqs::NqsError::SizeCap { .. } => CliError::OracleSize(e.to_string()),
            nqs::NqsError::InvalidSpec(_)
            | nqs::NqsError::Parse(_)
            | nqs::NqsError::EtaOutOfRange(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
