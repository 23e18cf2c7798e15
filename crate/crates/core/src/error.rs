use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("unsupported set kind: {0}")]
    UnsupportedSet(String),

    #[error("point is at a projection singularity of the {0}")]
    ProjectionSingularity(&'static str),

    #[error("point has non-finite coordinates")]
    NonFinitePoint,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} is not on the set (distance {distance:e})")]
    OffSet { index: usize, distance: f64 },

    #[error("coincident points {i} and {j} (distance {distance:e} below floor {floor:e})")]
    CoincidentPoints {
        i: usize,
        j: usize,
        distance: f64,
        floor: f64,
    },

    #[error("weight value {value} for points {i} and {j} is not finite and nonnegative")]
    InvalidWeightValue { i: usize, j: usize, value: f64 },

    #[error("weight is not differentiable: {0}")]
    NotDifferentiable(String),

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("density does not integrate to one (integral {integral})")]
    DensityNotNormalized { integral: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("all {starts} optimizer starts failed; last error: {last}")]
    AllStartsFailed { starts: usize, last: String },
}

pub type Result<T> = std::result::Result<T, Error>;
