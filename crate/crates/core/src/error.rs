use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A time point, integer or window lies outside the represented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two operands do not share window, lattice resolution or dimension.
    #[error("incompatible operands: {0}")]
    Incompatible(String),

    /// A parameter is outside its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Stored data violates a representation invariant (e.g. a NaN sample).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A reduction interval has a (near-)singular invertibility certificate.
    #[error("ill-posed on interval [{interval}, {interval}+1]: certificate {certificate:e} below {threshold:e}")]
    IllPosed {
        interval: i64,
        certificate: f64,
        threshold: f64,
    },

    /// The numerical dichotomy check did not confirm the supported case.
    #[error("unsupported case: {0}")]
    Unsupported(String),

    /// A fixed-point iteration ran out of iterations.
    #[error("no convergence after {iterations} iterations (last difference {last_difference:e}, contraction estimate {contraction:.4})")]
    NonConvergence {
        iterations: usize,
        last_difference: f64,
        contraction: f64,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical contract (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllPosed { .. } | Error::Unsupported(_) | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
