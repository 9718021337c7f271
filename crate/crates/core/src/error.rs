use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: substitution word has {subst} symbols but the input word has {input}")]
    LengthMismatch { subst: usize, input: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("marginal order {ell} exceeds the configured maximum {max}")]
    Resource { ell: usize, max: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("no strictly positive power found up to {cap}")]
    NotCertified { cap: usize },

    #[error("index out of range: {0}")]
    Range(String),

    #[error("precision exhausted at n = {n} after {bits} bits")]
    PrecisionExhausted { n: usize, bits: usize },

    #[error("non-positive value {value:e} at n = {n}")]
    Sign { n: usize, value: f64 },

    #[error("exponent is singular at p = {0}")]
    Singular(f64),

    #[error("no fixed point in (0, 1] at x = {x:e}")]
    Infeasible { x: f64 },

    #[error("rational mode requires an exact probability")]
    NotRational,
}

pub type Result<T> = std::result::Result<T, Error>;
