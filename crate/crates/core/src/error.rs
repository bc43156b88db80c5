//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the dynamics, control and analysis layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Pitch angle too close to the Euler-rate singularity.
    #[error("gimbal lock: |theta| = {theta:.6} rad is within {margin:.1e} of pi/2")]
    GimbalLock { theta: f64, margin: f64 },

    /// Mass matrix lost positive definiteness.
    #[error("singular mass matrix: min eigenvalue {min_eig:.3e}")]
    SingularMass { min_eig: f64 },

    /// A matrix required by the control law is not invertible.
    #[error("non-invertible matrix in {context}")]
    NonInvertible { context: String },

    /// The stabilizing-mode time window is too short to solve for coefficients.
    #[error("degenerate stabilizing window: {width:.3e} s")]
    DegenerateWindow { width: f64 },

    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Exponential-decay fit had too few transient samples.
    #[error("decay fit degenerate: {samples} transient samples (need >= {min})")]
    FitDegenerate { samples: usize, min: usize },

    /// Trace pair cannot be compared sample-by-sample.
    #[error("trace misaligned: {0}")]
    TraceMisaligned(String),

    /// Monte-Carlo sampling exhausted its budget before satisfying a check.
    #[error("sampling budget exceeded: {0}")]
    SamplingBudgetExceeded(String),

    /// I/O error while reading or writing artifacts.
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    /// Trace file malformed or empty.
    #[error("bad trace file: {0}")]
    BadTrace(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
