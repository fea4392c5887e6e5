use std::io;
use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented range.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    /// Two matrices or a header and body disagree on dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A text file could not be parsed. Lines are 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// SPL and PPL masking need at least one positive per row.
    #[error("row {row} has no positive label to retain")]
    NoPositive { row: usize },

    #[error("non-finite value: {0}")]
    Numeric(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}, batch {batch}: {message}")]
    Divergence {
        epoch: usize,
        batch: usize,
        message: String,
    },

    /// A loss was requested that cannot run on the supplied labels.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("average precision is undefined without relevant items")]
    UndefinedAp,

    #[error("every class has zero positives; mAP is undefined")]
    NoScorableClasses,

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
