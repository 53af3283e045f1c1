use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate labels: the label column has a single distinct value")]
    DegenerateLabels,
    #[error("insufficient class count for stratification: class {class} has {count} rows, needs {needed}")]
    InsufficientClassCount { class: u8, count: usize, needed: usize },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("budget exhausted")]
    BudgetExhausted,
    #[error("time limit exceeded")]
    TimeLimit,
    #[error("empty evaluation log")]
    EmptyLog,
    #[error("empty tie set")]
    EmptyTieSet,
    #[error("degenerate geometry: median pairwise distance is zero")]
    DegenerateGeometry,
    #[error("ill-conditioned surrogate")]
    IllConditioned,
    #[error("unknown algorithm id `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown selection rule `{0}`")]
    UnknownRule(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
