use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("resource cap exceeded: {0}")]
    Cap(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Cap(_) => 4,
        })
    }

    /// Classifies a library error raised while running `what`.
    pub fn from_core(what: &str, e: mgent_core::Error) -> Self {
        match e {
            mgent_core::Error::CapExceeded { .. } => CliError::Cap(format!("{what}: {e}")),
            e if e.is_numerical() => CliError::Numerical(format!("{what}: {e}")),
            e => CliError::Config(format!("{what}: {e}")),
        }
    }
}
