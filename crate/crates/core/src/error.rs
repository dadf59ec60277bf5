use thiserror::Error;

/// Errors produced by the aggregation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A model parameter (copula, tree shape, marginal) is invalid.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A numerical routine failed (non positive definite matrix, zero variance, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A configured size or memory cap would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// The sums at risk do not span a usable interval (S1 <= S0).
    #[error("degenerate sums at risk: {0}")]
    Degenerate(String),
    /// Experiment configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Domain(_) | Error::Parameter(_) | Error::Numeric(_) | Error::Degenerate(_) => 3,
            Error::Resource(_) => 4,
        }
    }
}
