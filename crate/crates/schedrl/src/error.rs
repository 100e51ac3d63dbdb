//! Crate-wide error type.
//!
//! Variants map onto the CLI exit codes: `Config` -> 2, `Io` -> 3,
//! `Numeric` -> 4. `State` is a programming/contract error (stepping a done
//! environment, sampling an undersized buffer) and also maps to 2 at the CLI
//! boundary since it can only be triggered there by bad configuration.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or input data; the message names the offending field.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem problem, with the path that caused it.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Parse failure in a text input, with 1-based line number.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// An operation was called in a state that forbids it.
    #[error("state error: {0}")]
    State(String),

    /// Non-finite value where a finite one is required; no state was modified.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::State(_) => 2,
            Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }
}
