use thiserror::Error;

/// Errors produced by the polytope, bound, sampling and game routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("halfspace normal has (near) zero norm")]
    ZeroNormal,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("set or objective is unbounded")]
    Unbounded,

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("polytope has empty interior (chebyshev radius {radius:e})")]
    NoInterior { radius: f64 },

    #[error("dimension {dim} exceeds the supported maximum {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("support count {k} exceeds the number of samples {n}")]
    FacetCountExceedsN { k: usize, n: usize },

    #[error("point is not contained in the certified set")]
    PointNotInSet,

    #[error("start point is not strictly interior")]
    NotInterior,

    #[error("infeasible instance, agents {0:?} have empty constraint sets")]
    InfeasibleInstance(Vec<usize>),

    #[error("agent {0} has an empty constraint set")]
    InfeasibleAgent(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
