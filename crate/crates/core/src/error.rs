use thiserror::Error;

/// Failure modes shared by every estimation stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point lies behind the camera (depth {depth})")]
    PointBehindCamera { depth: f64 },
    #[error("non-positive disparity {disparity}")]
    NonPositiveDisparity { disparity: f64 },
    #[error("degenerate minimal sample")]
    DegenerateSample,
    #[error("invalid inlier count q={q} (need {ns} < q <= {n})")]
    InvalidInlierCount { q: usize, ns: usize, n: usize },
    #[error("insufficient correspondences: got {got}, need at least {need}")]
    InsufficientCorrespondences { got: usize, need: usize },
    #[error("every hypothesis was degenerate")]
    AllHypothesesDegenerate,
    #[error("no valid model: best log-NFA {log_nfa} exceeds log-epsilon {log_epsilon}")]
    NoValidModel { log_nfa: f64, log_epsilon: f64 },
    #[error("optimizer diverged")]
    OptimizerDiverged,
    #[error("non-finite cost")]
    NonFiniteCost,
    #[error("invalid noise model: {0}")]
    InvalidModel(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("model cannot be normalized over an unbounded domain")]
    NonNormalizable,
    #[error("no point of the scene is visible in both frames")]
    FrustumEmpty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
