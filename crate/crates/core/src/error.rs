use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, mismatched shapes, unsupported options.
    #[error("configuration error: {0}")]
    Config(String),

    /// Configuration file that could not be parsed; `line` is 1-based when known.
    #[error("{path}: parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    /// An operation was called outside its domain (non-mean-free input, t = 0, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Series handed to an analysis routine are unusable.
    #[error("data error: {0}")]
    Data(String),

    /// The integrator produced a non-finite or runaway field.
    #[error("blow-up detected at t = {t}: {field} max-norm = {norm:e}")]
    BlowUp { t: f64, field: String, norm: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed checkpoint or CSV content.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
