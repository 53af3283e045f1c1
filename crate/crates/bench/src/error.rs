use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] svmtune_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dataset {dataset}: {source}")]
    Dataset { dataset: String, source: svmtune_core::Error },
    #[error("incomplete records for {algorithm} on {dataset}")]
    MissingRecords { algorithm: String, dataset: String },
    #[error("zero baseline time on {0}")]
    ZeroBaselineTime(String),
    #[error("stability requires predetermined probes ({0} is adaptive)")]
    NotGridLike(String),
    #[error("{0}")]
    Stats(String),
    #[error("malformed report: {0}")]
    Parse(String),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
