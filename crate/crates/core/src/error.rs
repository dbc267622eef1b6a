use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("class index {index} out of range for {classes} classes")]
    InvalidClass { index: usize, classes: usize },

    #[error("feature index {index} out of range for {features} features")]
    InvalidFeature { index: usize, features: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("domain violation at row {row}, column '{column}': {message}")]
    Domain {
        row: usize,
        column: String,
        message: String,
    },

    #[error("split '{0}' would be empty")]
    EmptySplit(&'static str),

    #[error("no contrastive class: every candidate has a degenerate gradient difference")]
    NoContrastiveClass,

    #[error("degenerate projection step: gradient difference norm below threshold")]
    DegenerateStep,

    #[error("local surrogate is degenerate: neighborhood covers fewer than two predicted classes")]
    DegenerateSurrogate,

    #[error("no training point is predicted differently from the query")]
    NoContrastivePoint,

    #[error("nothing to explain: predicate is empty")]
    EmptyPredicate,

    #[error("unknown template '{0}'")]
    UnknownTemplate(String),

    #[error("{0}")]
    Contract(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than configuration or generation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::MissingColumn(_)
                | Error::Domain { .. }
                | Error::EmptySplit(_)
                | Error::Empty(_)
                | Error::Shape { .. }
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Toml(_)
        )
    }
}
