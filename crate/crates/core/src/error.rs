use thiserror::Error;

/// Failures reported by the library.
///
/// Validation problems (bad input) and numerical failures are kept apart so
/// that front ends can map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HillError {
    #[error("invalid Fourier coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("energy parameter w = {w} lies in spectral gap {gap}")]
    InGap { w: f64, gap: usize },

    #[error("w = {w} is within {distance:e} of band edge {edge}; use the edge-limit product form")]
    EdgeProximity { w: f64, edge: f64, distance: f64 },

    #[error("Taylor integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("could not bracket band edges of gap {gap}: {detail}")]
    Bracket { gap: usize, detail: String },

    #[error("root search did not converge: {0}")]
    NoConvergence(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl HillError {
    /// True for errors caused by the caller's input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HillError::InvalidCoefficient(_) | HillError::InvalidArgument(_) | HillError::InGap { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, HillError>;
