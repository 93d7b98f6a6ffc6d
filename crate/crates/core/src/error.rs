use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "coherent amplitude |{amplitude}| leaves tail weight {tail:e} outside {dim} levels; \
         at least {required} levels are needed"
    )]
    TruncationTail {
        amplitude: f64,
        dim: usize,
        tail: f64,
        required: usize,
    },

    #[error("operator is not Hermitian (max |M - M^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    Eigen { dim: usize },

    #[error(
        "mean-field iteration did not converge after {iterations} iterations \
         (last residual {residual:e})"
    )]
    FrameNotConverged { iterations: usize, residual: f64 },

    #[error(
        "no stable mean field at these parameters (|alpha| grew for {iterations} \
         consecutive iterations)"
    )]
    FrameDiverged { iterations: usize },

    #[error("time {t} lies outside the coupling schedule range [{start}, {end}]")]
    ScheduleOutOfRange { t: f64, start: f64, end: f64 },

    #[error(
        "step-halving check failed: doubling the step count moved the final state by \
         {deviation:e} (tolerance {tolerance:e}); use at least {recommended} steps"
    )]
    StepConvergence {
        deviation: f64,
        tolerance: f64,
        recommended: usize,
    },

    #[error("quadrature did not converge to {tolerance:e} (last change {change:e})")]
    Quadrature { tolerance: f64, change: f64 },

    #[error("unknown preset `{0}` (expected `mechanics` or `cqed`)")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
