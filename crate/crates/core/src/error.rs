use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Configuration is missing, malformed, or inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// An input file could not be parsed (annotation, f0 table, pulse table, wav).
    #[error("parse: {0}")]
    Parse(String),

    /// Filesystem access failed.
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Numeric precondition violated (degenerate fit, bad filter spec, ...).
    #[error("numeric: {0}")]
    Numeric(String),

    /// Input data violates a documented invariant.
    #[error("data: {0}")]
    Data(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
