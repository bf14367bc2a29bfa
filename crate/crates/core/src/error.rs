//! Error taxonomy shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation
    /// (radius outside (0,1], point outside the computed range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid parameter (non-positive exponent, fewer than
    /// two resolutions, unsorted breakpoints, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A ball or cylinder is not contained in the region it must lie in.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The grid is too coarse for the requested scale.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    /// Carries the best value obtained so far.
    #[error("quadrature did not converge (partial value {partial}, error estimate {estimate})")]
    Quadrature { partial: f64, estimate: f64 },

    /// Iterative linear solve exceeded its iteration budget.
    #[error("solver did not converge in {iterations} iterations (relative residual {residual})")]
    Convergence { residual: f64, iterations: usize },

    /// A matrix handed to the CG solver is not symmetric.
    #[error("non-symmetric system: {0}")]
    NonSymmetric(String),

    /// A coefficient condition (ellipticity, boundedness, Dini seminorm)
    /// failed at a sampled witness.
    #[error("coefficient conditions violated: {0}")]
    Conditions(String),

    /// Malformed file content (field files, config-referenced CSV).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
