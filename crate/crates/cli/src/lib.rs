//! Pipeline driver behind the `acsm` binary.

pub mod commands;
pub mod config;
pub mod experiments;

use acsm_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 config or input error, 3 numerical gate, 4 integrator rejection, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidParams(_)
                | Error::OrderCap { .. }
                | Error::UnsupportedObservable(_)
                | Error::GridMisaligned { .. }
                | Error::Insufficient(_)
                | Error::Format(_)
                | Error::Json(_) => 2,
                Error::NegativeDeterminant { .. } | Error::IndeterminateSign { .. } | Error::Residual { .. } => 3,
                Error::StepTooLarge(_) | Error::EnergyDrift { .. } => 4,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
