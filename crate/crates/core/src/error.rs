use thiserror::Error;

/// Errors produced by the clustering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive entry {value} at row {row}, column {column}")]
    NonPositiveEntry { row: usize, column: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("invalid input shape: {0}")]
    Shape(String),

    #[error("non-finite entry at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace is missing classification probabilities")]
    MissingClassProbs,

    #[error("at least two chains are required, got {0}")]
    InsufficientChains(usize),

    #[error("trace contains no draws")]
    EmptyTrace,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("fit failed for k = {k}: {source}")]
    FitFailed {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: msg.into(),
        }
    }

    /// True for errors caused by the input data rather than the configuration.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::NonPositiveEntry { .. }
            | Error::RowSumViolation { .. }
            | Error::Shape(_)
            | Error::NonFinite { .. }
            | Error::LengthMismatch(..)
            | Error::MissingClassProbs
            | Error::EmptyTrace
            | Error::Format { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => true,
            Error::FitFailed { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
