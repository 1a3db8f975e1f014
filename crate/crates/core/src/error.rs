use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pattern `{pattern}` has no eligible site in the text")]
    PatternInapplicable { pattern: &'static str },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: schema violation: {message}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("annotation drift: annotator changed the text ({0})")]
    AnnotationDrift(String),

    #[error("cannot balance dataset: {positives} positives, {negatives} negatives")]
    CannotBalance { positives: usize, negatives: usize },

    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),

    #[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend { status: Option<u16>, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{component} unreachable: {message}")]
    Unreachable { component: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn backend(status: Option<u16>, message: impl Into<String>) -> Self {
        Error::Backend {
            status,
            message: message.into(),
        }
    }
}
