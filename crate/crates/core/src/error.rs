use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A tuning parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data or a derived object failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A linear system or matrix was singular or too badly conditioned.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The covariance of a vector of estimates is not positive definite.
    #[error("covariance is singular: {0}")]
    Singular(String),

    /// The point estimate exists but its variance could not be estimated.
    #[error("inference unavailable for point estimate {point}: {reason}")]
    Inference { point: f64, reason: String },
}

impl Error {
    /// Stable process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Validation(_) => 1,
            Error::Numeric(_) | Error::Singular(_) | Error::Inference { .. } => 2,
        }
    }
}
