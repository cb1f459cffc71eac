//! Crate-wide error type.
//!
//! Library functions never panic on bad caller input; they return
//! [`Error::InvalidArgument`]. Failures inside numeric kernels (SVD that does
//! not converge, non-finite intermediates) surface as [`Error::Numeric`] so
//! callers can distinguish "you asked for something impossible" from "the
//! computation broke down". Rejection-sampling generators that exhaust their
//! retry budget report [`Error::Generation`].

use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on caller-supplied arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A randomized generator exhausted its retry budget.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// CSV (de)serialization failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an [`Error::InvalidArgument`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Shorthand for an [`Error::Numeric`] with a formatted message.
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
