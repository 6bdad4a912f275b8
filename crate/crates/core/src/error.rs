use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent configuration, e.g. a rule built for another dimension.
    #[error("configuration error: {0}")]
    Config(String),

    /// A run would need more memory than the configured budget allows.
    #[error("resource limit: need {required} bytes but the budget is {available} bytes; {hint}")]
    Resource {
        required: u64,
        available: u64,
        hint: String,
    },

    /// Not enough usable data points for an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A binary file did not match the expected layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
