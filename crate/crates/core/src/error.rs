use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input outside an operation's domain (bad index, t outside a table, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Requested time lies at or beyond the first caustic.
    #[error("caustic: t = {t} is not inside the validity window (valid_to = {valid_to})")]
    Caustic { t: f64, valid_to: f64 },
    /// A precondition of a specific solver does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Adaptive integration could not continue.
    #[error("integration failure at t = {t_last}: {reason}")]
    Integration { t_last: f64, reason: String },
    /// Result of a computation that must lie in a span did not.
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
