use thiserror::Error;

/// Errors raised by the library layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LgmError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("model not identified: {0}")]
    Identification(String),

    #[error("covariance for individual {index} is not positive definite")]
    NonPdCovariance { index: usize },

    #[error("covariate covariance matrix is not positive definite")]
    NonPdCovariates,

    #[error("conditional likelihood requires a covariate vector")]
    MissingCovariates,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("invalid condition: {0}")]
    InvalidCondition(String),

    #[error("joint factor/covariate covariance is not positive semidefinite")]
    NonPsdJoint,

    #[error("at least {needed} replications are required, got {got}")]
    TooFewReps { needed: usize, got: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LgmError>;
