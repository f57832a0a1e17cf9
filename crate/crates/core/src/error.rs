use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("item {item} out of range for {m} items")]
    ItemOutOfRange { item: usize, m: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("enumeration needs {required} evaluations, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("no progress: {0}")]
    NoProgress(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_param(
    name: &'static str,
    value: impl ToString,
    reason: &'static str,
) -> Error {
    Error::InvalidParameter {
        name,
        value: value.to_string(),
        reason,
    }
}
