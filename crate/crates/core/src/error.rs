use thiserror::Error;

/// Errors produced by tensor construction, case setup, the solvers and the
/// threshold analysis.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("anisotropy ratio must be >= 1, got {0}")]
    InvalidRatio(f64),

    #[error("tensor is not positive definite (kx={kx}, ky={ky}, kc={kc})")]
    NotPositiveDefinite { kx: f64, ky: f64, kc: f64 },

    #[error("field direction is degenerate (zero vector)")]
    DegenerateDirection,

    #[error("grid needs at least 2 cells per direction, got {nx}x{ny}")]
    InvalidGrid { nx: usize, ny: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("implicit source solve is singular at alpha_s = {alpha_s}")]
    SingularSource { alpha_s: f64 },

    #[error("solution diverged at step {step}")]
    Divergence { step: u64 },

    #[error("f_C has no real roots (discriminant {discriminant})")]
    NoRealRoots { discriminant: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),

    #[error("discrete operator is singular (zero diagonal)")]
    SingularOperator,

    #[error("state does not match grid ({got} nodes, expected {expected})")]
    ShapeMismatch { got: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
