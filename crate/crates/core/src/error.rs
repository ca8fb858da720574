use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum MadelungError {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation was requested at a point where the quantity diverges
    /// (a lattice point for the Green function, a charge site for the
    /// potential).
    #[error("singular point: {0}")]
    Singularity(String),

    /// The operation is not defined for the given configuration (wrong
    /// dimension, wrong crystal family, unavailable arrangement).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Quadrature did not reach the requested tolerance. `value` carries
    /// the best available estimate, `error_estimate` its error bound.
    #[error("accuracy not reached: estimate {value} +/- {error_estimate}")]
    Accuracy { value: f64, error_estimate: f64 },

    /// An internal cross-check failed (e.g. Ewald splitting invariance).
    #[error("internal consistency check failed: {0}")]
    SelfCheck(String),

    /// Input/output failure while writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MadelungError>;
