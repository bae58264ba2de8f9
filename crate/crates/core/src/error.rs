use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample region rejected every candidate ({0})")]
    EmptySampleSet(String),

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("causality violation: {0}")]
    CausalityViolation(String),

    #[error("denominator below threshold: {0}")]
    ZeroDenominator(String),

    #[error("exponential overflow guard tripped: {0}")]
    OverflowGuard(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
