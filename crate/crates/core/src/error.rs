use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("image `{id}`: {message}")]
    Image { id: String, message: String },

    #[error("render failed: {0}")]
    Render(String),

    #[error("descriptor length mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("feature space mismatch: {0:016x} vs {1:016x}")]
    ParamsMismatch(u64, u64),

    #[error("class `{class}` needs {needed} {pool} images but only {available} are available (short by {})", needed - available)]
    InsufficientPool {
        class: String,
        pool: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (manifests, configs, arguments)
    /// as opposed to failures while computing or writing results.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::ParamsMismatch(..)
                | Error::InsufficientPool { .. }
                | Error::Json(_)
        )
    }
}
