use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV parse failure at row {row}: {message}")]
    CsvParse { row: usize, message: String },

    #[error("non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },

    #[error("all-zero column {column:?}")]
    ZeroColumn { column: String },

    #[error("target column {0} not found")]
    MissingTarget(String),

    #[error("dataset has no feature columns")]
    NoFeatures,

    #[error("dataset has no rows")]
    NoRows,

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate split: {n_train} train / {n_test} test rows")]
    DegenerateSplit { n_train: usize, n_test: usize },

    #[error("alpha {alpha} outside (0, {max}]")]
    AlphaOutOfRange { alpha: f64, max: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("polynomial degree {0} exceeds 4")]
    DegreeTooHigh(usize),

    #[error("penalty must be positive and finite, got {0}")]
    InvalidPenalty(f64),

    #[error("{what} limited to {limit} variables, got {got}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("model has no nonzero coefficients")]
    EmptyModel,

    #[error("invalid anneal schedule: {0}")]
    InvalidSchedule(String),

    #[error("QUBO file line {line}: {message}")]
    QuboFormat { line: usize, message: String },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
