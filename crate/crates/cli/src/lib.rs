//! Configuration, ledger resolution and command dispatch for `fbpopt`.

pub mod commands;
pub mod config;
pub mod resolve;

pub use commands::{run_command, Command, Outcome};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use fbp_core::expr::Expression;
pub use resolve::{resolve, Resolved};

use fbp_core::FbpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[from] FbpError),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub(crate) fn config(e: FbpError) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
