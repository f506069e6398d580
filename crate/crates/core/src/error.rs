use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at {context}")]
    NonFinite { value: f64, context: String },

    #[error(
        "adaptive quadrature did not converge on [{lo}, {hi}] after {subdivisions} subdivisions \
         (estimated error {error:e}, requested {requested:e})"
    )]
    NoConvergence {
        lo: f64,
        hi: f64,
        subdivisions: usize,
        error: f64,
        requested: f64,
    },

    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
