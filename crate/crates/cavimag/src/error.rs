use std::fmt;

use crate::ovf::OvfError;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A library call received an invalid argument or was used out of order.
    Invalid(String),
    /// A config file failed to parse; carries the 1-based line number where
    /// the problem was found (when one can be pinned down).
    ConfigParse { line: Option<usize>, msg: String },
    /// An OVF document failed to parse or validate.
    Ovf(OvfError),
    /// Spectral splitting extraction could not resolve two peaks anywhere.
    Unresolved(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "{msg}"),
            Error::ConfigParse { line: Some(n), msg } => write!(f, "config line {n}: {msg}"),
            Error::ConfigParse { line: None, msg } => write!(f, "config: {msg}"),
            Error::Ovf(e) => write!(f, "ovf: {e}"),
            Error::Unresolved(msg) => write!(f, "unresolved: {msg}"),
            Error::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Ovf(e) => Some(e),
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<OvfError> for Error {
    fn from(e: OvfError) -> Self {
        Error::Ovf(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
