//! Error taxonomy. Variants map onto the CLI exit codes documented in the
//! README: configuration/input problems (2), infeasible constraints (3),
//! numerical failures and refused capabilities (4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad probability vectors, non-positive parameters,
    /// mismatched support lengths and the like.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Arguments outside the mathematical domain of an operation
    /// (negative time, non-positive wealth, evaluation at or past the
    /// horizon).
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested value lies outside the attainable range of a monotone map
    /// (e.g. inverting the mixture below its lower bound).
    #[error("range error: {0}")]
    Range(String),

    /// The operation is well-posed only under assumptions the inputs do not
    /// satisfy (e.g. signed prior support where monotonicity is required).
    /// Refused rather than approximated.
    #[error("capability error: {0}")]
    Capability(String),

    /// The constraint cannot be financed from the initial wealth.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Root bracketing or convergence failure in the numerical layer.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Configuration file problems (I/O is wrapped separately).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Domain(_) | Error::Range(_) | Error::Capability(_) | Error::Numeric(_) => 4,
        }
    }
}
