use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix A is rank deficient: sigma_min/sigma_max = {ratio:.3e}")]
    RankDeficientA { ratio: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("M2 is numerically singular (smallest eigenvalue {eig:.3e})")]
    SingularMetric { eig: f64 },

    #[error("nonpositive generalized eigenvalue {eig:.3e} in metric system")]
    NonpositiveEigenvalue { eig: f64 },

    #[error("shifted system factorization failed at shift {shift:.3e}")]
    FactorizationFailed { shift: f64 },

    #[error("horizontal projection system is singular")]
    SingularProjection,

    #[error("retraction produced a rank-deficient factor")]
    RankCollapse,

    #[error("C = 0: relative residual is undefined")]
    ZeroRightHandSide,

    #[error("unknown benchmark family: {0}")]
    UnknownFamily(String),

    #[error("dense Riccati solve failed: {0}")]
    DenseSolve(String),
}

pub type Result<T> = std::result::Result<T, RiccatiError>;
