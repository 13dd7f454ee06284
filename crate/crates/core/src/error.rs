use std::io;

use thiserror::Error;

use crate::bridge::FrameError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input was outside the domain of the model (NaN, infinite, negative speed, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition (length mismatch, acting after termination, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown environment id `{id}`; valid ids include: {}", valid.join(", "))]
    UnknownEnv { id: String, valid: Vec<String> },

    #[error("unknown layout `{0}`")]
    UnknownLayout(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("training aborted: {0}")]
    NonFinite(String),

    #[error("free-stream estimator has no samples yet")]
    EstimatorNotReady,

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("session timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error(transparent)]
    Frame(#[from] FrameError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
