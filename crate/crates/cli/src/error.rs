use std::fmt;

/// Failure of a command, split by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing, unreadable or malformed inputs and invalid settings (exit 1).
    #[error("input error: {0}")]
    Input(String),
    /// The run started but could not produce its outputs (exit 2).
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn input(msg: impl fmt::Display) -> Self {
        Self::Input(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Self::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(format!("csv error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
