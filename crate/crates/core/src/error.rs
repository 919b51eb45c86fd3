use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: missing required field `{field}`")]
    Schema { line: usize, field: String },

    #[error("note {raw:?} is empty after normalization")]
    EmptyNote { raw: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("perfume {id:?} has no notes")]
    EmptyNoteSet { id: String },

    #[error("no token reaches min_count {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("line {line}: format error: {message}")]
    Format { line: usize, message: String },

    #[error("vector norm below {threshold:e}; cosine is undefined")]
    DegenerateVector { threshold: f64 },

    #[error("token {0:?} is not in the embedding table")]
    OutOfVocabulary(String),

    #[error("ranking contains duplicate item {0:?}")]
    MalformedRanking(String),

    #[error("degenerate statistic: {0}")]
    DegenerateTest(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human-readable location, e.g. a file name.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the analysis itself (degenerate statistics,
    /// insufficient overlap) as opposed to bad input or I/O.
    pub fn is_analysis(&self) -> bool {
        match self {
            Error::DegenerateVector { .. }
            | Error::DegenerateTest(_)
            | Error::Insufficient(_)
            | Error::EmptyVocabulary { .. }
            | Error::Generation(_) => true,
            Error::Context { source, .. } => source.is_analysis(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
