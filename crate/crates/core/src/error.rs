use std::path::PathBuf;

/// Errors produced by the analysis routines and the file readers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a precondition (negative entry, wrong shape, bad flag).
    #[error("invalid input: {0}")]
    Validation(String),

    /// A file could not be parsed; carries the location of the problem.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_user_error(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
