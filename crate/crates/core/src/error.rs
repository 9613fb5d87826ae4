use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Unrecognised magic, unsupported version or malformed structure.
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter or longer than the header promises.
    #[error("length error: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },

    /// A data invariant does not hold.
    #[error("validation error: {0}")]
    Validation(String),

    /// Incompatible configuration or mismatched inputs (e.g. dims).
    #[error("config error: {0}")]
    Config(String),

    /// The requested computation has no solution for the given inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 validation, 2 config, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) | Error::IoAt { .. } => 3,
            Error::Config(_) | Error::Infeasible(_) => 2,
            Error::Format(_) | Error::Length { .. } | Error::Validation(_) => 1,
        }
    }
}
