use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input falls outside the range an operation is defined on.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured size guard (enumeration, brute force, matrix dimension,
    /// subset count) would be exceeded.
    #[error("size limit exceeded: {what} = {value} > {limit}")]
    SizeLimit {
        what: &'static str,
        value: u128,
        limit: u128,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian: deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("covariance is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("eigensolver failed to converge")]
    Eigen,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for the resource-cap family of errors (dedicated CLI exit code).
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::SizeLimit { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
