//! Error type shared across the library.

/// Errors produced by grid construction, functional evaluation, time
/// stepping, and the stationary solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field/grid mismatch: {0}")]
    GridMismatch(String),

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error("mass mismatch: expected {expected}, got {actual}")]
    MassMismatch { expected: f64, actual: f64 },

    #[error("input must have zero mean, got mean {0:e}")]
    NonzeroMean(f64),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("advective CFL violation at t = {time}: dt * outflow rate = {ratio} > 1")]
    CflViolation { time: f64, ratio: f64 },

    #[error("non-finite value in {field} at t = {time}")]
    NonFinite { field: &'static str, time: f64 },

    #[error(
        "fixed-point iteration did not converge after {iters} iterations \
         (last residual {residual:e}); consider reducing the damping factor"
    )]
    NoConvergence { iters: usize, residual: f64 },

    #[error("exponent overflow in e^w: max w = {0}")]
    ExpOverflow(f64),

    #[error(
        "concentration profile unresolved on this grid: the anchor cell carries \
         {anchor_fraction:.3} of ||e^w||_1 (> 0.5); smallest resolvable eta is about {min_eta:.4}"
    )]
    UnresolvedProfile { anchor_fraction: f64, min_eta: f64 },

    #[error("builder produced a signed chemoattractant field (min w = {min_w:e}); increase M/(delta*|Omega|)")]
    NegativeSignal { min_w: f64 },

    #[error("clipping the settled field would discard {fraction:.4} of its mass (limit 0.01)")]
    ExcessiveClipping { fraction: f64 },

    #[error("no seed produced a converged stationary state")]
    EmptyConvergedSet,
}

pub type Result<T> = std::result::Result<T, Error>;
