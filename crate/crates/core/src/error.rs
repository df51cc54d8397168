use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time {t} is outside the generated horizon [{lo}, {hi}]")]
    OutOfHorizon { t: f64, lo: f64, hi: f64 },

    #[error("level {level} needs {needed} steps of the previous level but only {available} exist")]
    InsufficientPreviousLevel {
        level: u32,
        needed: usize,
        available: usize,
    },

    #[error("level {level} would need more than {cap} raw steps")]
    ResourceLimit { level: u32, cap: usize },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
