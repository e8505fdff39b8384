use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative mixture coefficient gamma_{p} = {value}")]
    NegativeCoefficient { p: usize, value: f64 },

    #[error("mixture has no positive coefficient")]
    AllZero,

    #[error("{what} = {value} is outside its domain {domain}")]
    DomainError {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coupling tensors need {required} bytes but the budget is {budget} bytes")]
    ResourceLimit { required: u64, budget: u64 },

    #[error("exact quadrature is not available for this domain ({0})")]
    UnsupportedDimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed coupling dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
