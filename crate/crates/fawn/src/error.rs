//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Tensor shapes do not satisfy an operation's contract.
    Shape(String),
    /// An index (class target, grid cell, sample index) is out of range.
    Index(String),
    /// A structural precondition was violated (non-scalar loss, empty split input, ...).
    Contract(String),
    /// Training produced a non-finite loss.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// A binary file violates its format; `offset` is the byte position of the violation.
    Format { offset: u64, message: String },
    /// A config or report document is invalid; `key` is the offending key path.
    Config { key: String, message: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Index(msg) => write!(f, "index error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::Config { key, message } => write!(f, "config error at `{key}`: {message}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
