use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("QPSK mapping needs an even number of bits, got {0}")]
    OddBitCount(usize),

    #[error("failed to parse {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
