use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix exponential overflows: largest eigenvalue {0} exceeds ln(f64::MAX)")]
    Overflow(f64),

    #[error("Hermitian eigendecomposition did not converge")]
    NoConvergence,

    #[error(
        "no complete set of mutually unbiased bases is built for dimension {0} (prime dimensions only); \
         use the generalized Pauli scheme instead"
    )]
    UnsupportedDimension(usize),

    #[error("estimator step failed at iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run (state {state}, repeat {repeat}) failed: {source}")]
    Run {
        state: usize,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
