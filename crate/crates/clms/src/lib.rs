//! Experiment runner for closed-loop kernel selection: JSON configuration,
//! CSV/JSON artifacts and the command bodies behind the `clms` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

/// Config errors exit with 2, pipeline errors with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Pipeline(_) => 1,
        }
    }
}

impl From<clms_core::Error> for CliError {
    fn from(e: clms_core::Error) -> Self {
        CliError::Pipeline(e.to_string())
    }
}
