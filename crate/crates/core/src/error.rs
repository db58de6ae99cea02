use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ambient dimension must be at least 1")]
    ZeroDimension,
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("operation requires a polynomial of degree >= 1")]
    ConstantPolynomial,
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("matrix is singular or too ill-conditioned (condition number {cond:e})")]
    Singular { cond: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point is off the constraint set (residual {residual:e})")]
    OffConstraintSet { residual: f64 },
    #[error("degenerate point: constraint jacobian has rank {rank}, expected {expected}")]
    DegeneratePoint { rank: usize, expected: usize },
    #[error("delta is not finite; a polynomial solution basis needs a terminating chain")]
    NonFiniteDelta,
    #[error("unknown constraint family `{0}`")]
    UnknownFamily(String),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
