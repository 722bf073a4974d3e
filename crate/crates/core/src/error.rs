use alloc::string::String;

use crate::sdp::SdpStatus;

/// Errors raised by the detector-design toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds tolerance)")]
    NotHermitian { defect: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:.3e} below {tol:.1e})")]
    NotPositiveDefinite { min_eig: f64, tol: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("singular linear system")]
    Singular,

    #[error("invalid state {index}: {reason}")]
    InvalidState { index: usize, reason: String },

    #[error("priors must be non-negative and sum to 1 (sum = {sum})")]
    InvalidPriors { sum: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error(
        "mixture is singular (smallest eigenvalue {min_eig:.3e}); restrict attention to the \
         range space of the mixture (enable range reduction)"
    )]
    SingularMixture { min_eig: f64 },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid SDP: {0}")]
    InvalidProblem(String),

    #[error("SDP solver stopped with status {status:?} after {iterations} iterations")]
    Solver {
        status: SdpStatus,
        iterations: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
