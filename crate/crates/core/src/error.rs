use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HardyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("empty support: {0}")]
    EmptySupport(String),
}

pub type Result<T> = std::result::Result<T, HardyError>;
