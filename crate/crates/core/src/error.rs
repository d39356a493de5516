use thiserror::Error;

/// Errors raised by solvers, simulators and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested variant (order, dimension, study) is not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Required recorded data (time slice, dense path, estimate) is absent.
    #[error("missing data: {0}")]
    MissingData(String),

    /// Malformed configuration text.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
