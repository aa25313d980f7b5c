use thiserror::Error;

/// Errors raised while building or checking truncated models.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not converge: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },

    #[error("boost parameter {lambda} is not a multiple of the grid spacing {spacing}")]
    NonGridBoost { lambda: f64, spacing: f64 },

    #[error("representation property violated: {0}")]
    Representation(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("vector is not cyclic and separating: {0}")]
    NotCyclicSeparating(String),

    #[error("closure did not stabilize within degree {0}")]
    ClosureNotStable(usize),

    #[error("grading error: {0}")]
    Grading(String),

    #[error("supports are not spacelike separated: {0}")]
    NotSpacelike(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
