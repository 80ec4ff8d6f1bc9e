use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("no trials to aggregate")]
    NoTrials,

    #[error("outcomes mix architectures `{first}` and `{other}`")]
    MixedArchitectures { first: String, other: String },

    #[error("unknown profile `{0}`")]
    UnknownProfile(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
