use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Unrecognized magic, version or kind byte.
    #[error("format error: {0}")]
    Format(String),

    /// The file is shorter or longer than its header announces.
    #[error("corrupted file: {0}")]
    Corruption(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario construction error: {0}")]
    Scenario(String),

    /// Operation not possible in the current state (e.g. predicting with nothing observed).
    #[error("state error: {0}")]
    State(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn shape(expected: usize, actual: usize) -> Self {
        Error::Shape { expected, actual }
    }
}
