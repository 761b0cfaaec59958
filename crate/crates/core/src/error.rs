use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("class {class_index} ({language}) has no sentences after parsing")]
    EmptyClass { class_index: u32, language: String },

    #[error("class {class_index} has {count} sentence(s); at least 2 are needed to split")]
    ClassTooSmall { class_index: u32, count: usize },

    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadTestFraction(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("feature vector has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },

    #[error("length mismatch: {0} true labels vs {1} predictions")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Format(#[from] crate::forest::format::FormatError),
}
