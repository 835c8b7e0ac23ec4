//! Exit-code classification.

use std::fmt;

use driftbench_core::Error as CoreError;

pub const OK: u8 = 0;
pub const FAILURE: u8 = 1;
pub const INVALID: u8 = 2;

/// An error paired with the process exit code it should produce.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: INVALID,
            error: error.into(),
        }
    }

    pub fn failure(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: FAILURE,
            error: error.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Bad input (files, shapes, settings) is a validation problem; anything
/// that goes wrong while reading, writing or computing is a run failure.
pub fn code_for(error: &CoreError) -> u8 {
    match error {
        CoreError::Io(_) | CoreError::State(_) | CoreError::Numerical(_) => FAILURE,
        CoreError::Format(_)
        | CoreError::Corruption(_)
        | CoreError::Validation(_)
        | CoreError::Shape { .. }
        | CoreError::Config(_)
        | CoreError::Scenario(_) => INVALID,
    }
}

impl From<CoreError> for CliError {
    fn from(error: CoreError) -> Self {
        Self {
            code: code_for(&error),
            error: error.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(error: std::io::Error) -> Self {
        Self::failure(error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Context<T> {
    fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> CliResult<T> {
        self.map_err(|e| {
            let e: CliError = e.into();
            CliError {
                code: e.code,
                error: e.error.context(msg),
            }
        })
    }
}
