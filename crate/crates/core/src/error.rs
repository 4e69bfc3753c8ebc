use std::fmt;

/// Errors raised by the library. Configuration problems are kept apart from
/// numerical failures so the CLI can map them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range for a grid with {n_steps} steps")]
    IndexOutOfRange { index: usize, n_steps: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("path has {got} values but the grid needs {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("no horizontal room at node {0}")]
    NoHorizontalRoom(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bridge target unreachable numerically")]
    Unreachable,

    #[error("{0}")]
    Config(String),

    #[error("simulation aborted: {0}")]
    Abort(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 2,
            Error::InvalidGrid(_) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
