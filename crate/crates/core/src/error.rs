use thiserror::Error;

use crate::psit::CsViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation matrix is not positive semi-definite (leading minor {minor})")]
    NotPositiveSemiDefinite { minor: usize },

    #[error("precondition violated on path {path}: {detail}")]
    Precondition { path: usize, detail: String },

    #[error("invalid coupled sequence: {0}")]
    CoupledSequence(CsViolation),

    #[error("price not positive on path {path} at index {index} (increment {increment})")]
    PriceNotPositive {
        path: usize,
        index: usize,
        increment: f64,
    },

    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
