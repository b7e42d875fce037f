use std::path::PathBuf;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("dataset failed validation:\n{0}")]
    Invalid(ValidationReport),

    #[error("duplicate key {0}")]
    DuplicateKey(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("budget too small: {budget} is below the cost of a singleton cluster")]
    BudgetTooSmall { budget: f64 },

    #[error("k exceeds all cluster sizes (k = {k}, largest cluster = {largest})")]
    KTooLarge { k: usize, largest: usize },

    #[error("{count} instance(s) in scope have no prediction: {preview}")]
    MissingPredictions { count: usize, preview: String },

    #[error("prediction for unknown instance id {0:?}")]
    UnknownPrediction(String),

    #[error("annotation references unknown question id {0:?}")]
    UnknownQuestion(String),

    #[error("experiment {experiment_id} replica {replica}: {source}")]
    Point {
        experiment_id: String,
        replica: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("grid spec: {0}")]
    GridSpec(String),
}

impl Error {
    pub(crate) fn record(line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::Param(message.into())
    }
}
