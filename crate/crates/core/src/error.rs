use thiserror::Error;

/// Errors surfaced by the laboratory. The variant decides the CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("landscape has no finite CCTS value over the step grid")]
    Unsolved,

    #[error("worker failed: {0}")]
    Worker(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: String, msg: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(path: impl AsRef<std::path::Path>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            msg: msg.to_string(),
        }
    }

    /// Process exit code: 2 invalid config, 3 numeric failure, 4 unsolved landscape.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Unsolved => 4,
            Error::Numeric(_) | Error::Worker(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
