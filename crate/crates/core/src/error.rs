use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An experiment or solver is configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// A tabulated drift was queried outside its grid.
    #[error("extrapolation: coordinate {coord} = {value} outside [{lo}, {hi}]")]
    Extrapolation {
        coord: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
