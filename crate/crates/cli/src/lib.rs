//! Command-line driver: parses flags, runs one experiment, and writes its
//! CSV/JSON outputs together with a replayable manifest.

pub mod args;
pub mod commands;
pub mod manifest;

use qwsearch::Error as CoreError;

pub use args::{Cli, Command};
pub use commands::run;
pub use manifest::Manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_INSTABILITY: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::Validation(_) => EXIT_USAGE,
                CoreError::Capacity { .. } => EXIT_CAPACITY,
                CoreError::NumericalInstability(_) | CoreError::NotHermitian { .. } => EXIT_INSTABILITY,
                CoreError::BracketEdge { .. } => EXIT_FAILURE,
            },
            CliError::Io(_) | CliError::Manifest(_) => EXIT_FAILURE,
        }
    }
}

#[cfg(test)]
mod tests;
