//! Library side of the `translab` command-line front end: configuration
//! parsing, subcommand implementations, and report emission. The binary
//! in `main.rs` is a thin clap wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod report;

pub use translab_core as core;

use thiserror::Error;

/// CLI failure taxonomy mapping onto process exit codes: validation
/// failures exit 1, numerical failures exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn validation<S: Into<String>>(msg: S) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn numerical<S: Into<String>>(msg: S) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<translab_core::Error> for CliError {
    fn from(e: translab_core::Error) -> Self {
        use translab_core::Error as E;
        match e {
            E::Quadrature { .. } | E::Convergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
