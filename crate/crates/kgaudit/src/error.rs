//! Error type shared across the toolkit.

use std::path::PathBuf;

/// All failure modes surfaced by the library.
///
/// Callers map these onto process exit codes: usage and configuration
/// problems, data that fails to parse or validate, and internal invariant
/// breaches are kept distinct so batch drivers can tell them apart.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Command line or API misuse (bad flag combination, missing argument).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration value or unknown configuration key.
    #[error("configuration error: {0}")]
    Config(String),

    /// A required input file does not exist.
    #[error("missing input file: {}", .0.display())]
    MissingInput(PathBuf),

    /// A row of an input file failed to parse or validate.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    /// Input that parsed but failed cross-file validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A reasoning path that is structurally malformed.
    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// Reference to an id that is not part of the dataset.
    #[error("unknown {kind} id: {id}")]
    UnknownId { kind: &'static str, id: u32 },

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Builds a row-addressed parse error.
    pub fn parse(file: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for this error class.
    ///
    /// 2 = usage/configuration, 3 = unreadable or invalid data, 4 = internal
    /// invariant breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::MissingInput(_) => 2,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidPath(_)
            | Error::UnknownId { .. }
            | Error::Io(_)
            | Error::Json(_) => 3,
            Error::Invariant(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
