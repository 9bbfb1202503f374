//! Command-line harness: config parsing, run/verify/benchmark commands and
//! their output files.

pub mod commands;
pub mod config_file;
pub mod output;

use config_file::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sabc_core::SabcError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the config or flags, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(sabc_core::SabcError::UnknownTask(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
