use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix or vector contains a non-finite entry")]
    NonFinite,

    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("eigenvalue gap {gap:e} is below the grouping tolerance {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("Jacobian is singular: nodes {i} and {j} collided (gap {gap:e})")]
    SingularJacobian { i: usize, j: usize, gap: f64 },

    #[error("argument {value} is outside the open interval ({lo}, {hi})")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("value {value} is not bracketed by the range ({lo}, {hi}) of the forward map")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("F_k({t}) = {value} is not positive")]
    NonPositiveFk { t: f64, value: f64 },

    #[error("integration path crosses the pole of factor {index} (1 + c*tau = {value:e})")]
    PoleCrossed { index: usize, value: f64 },

    #[error("projection rank {k} is out of range for dimension {n}")]
    RankOutOfRange { n: usize, k: usize },

    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("point is within {distance:e} of the cylinder axis (margin {margin:e})")]
    AxisTooClose { distance: f64, margin: f64 },

    #[error("finite-difference step {h:e} is below the admissible minimum {min:e}")]
    StepTooSmall { h: f64, min: f64 },

    #[error("gradient norm {gradnorm:e} is at or below the critical threshold {eps:e}")]
    CriticalPoint { gradnorm: f64, eps: f64 },

    #[error("eigenvalue gaps straddle the grouping tolerance: {gaps:?}")]
    GroupingAmbiguous { gaps: Vec<f64> },

    #[error("flow left the admissible domain at tau = {tau}")]
    DomainExit { tau: f64 },

    #[error("level {value} is outside the estimated profile table [{lo}, {hi}]")]
    ProfileRangeExceeded { value: f64, lo: f64, hi: f64 },

    #[error("focal point: 1 + t*kappa = {value:e} for kappa = {kappa}")]
    FocalPoint { kappa: f64, value: f64 },

    #[error("segment leaves the admissible domain")]
    InadmissibleSegment,

    #[error("finite-difference stencil leaves the admissible domain")]
    InadmissibleStencil,

    #[error("point is not admissible for this field")]
    Inadmissible,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
