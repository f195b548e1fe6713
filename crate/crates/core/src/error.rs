use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {0} is outside the supported range 1..=16")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate spectrum: gap {gap:e} is not above tolerance {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("complex spectrum: |Im E| = {imag:e} exceeds {tol:e}")]
    ComplexSpectrum { imag: f64, tol: f64 },

    #[error("operator is not pseudo-Hermitian with respect to eta (residual {residual:e})")]
    NotPseudoHermitian { residual: f64 },

    #[error("eta must be Hermitian and invertible: {0}")]
    InvalidEta(&'static str),

    #[error("vector {0} is zero")]
    ZeroVector(usize),

    #[error("deformation parameter q must be positive, got {0}")]
    NonPositiveQ(f64),

    #[error("eigenvalues are complex: radicand {0:e} < 0")]
    ComplexEigenvalues(f64),

    #[error("unknown parameter direction `{0}`")]
    UnknownDirection(String),

    #[error("finite-difference step too large: {0}")]
    StepTooLarge(String),

    #[error("QGT components do not form a swapped pair: {0}")]
    IndexMismatch(&'static str),

    #[error("time {t} outside ramp interval [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },

    #[error("invalid ramp schedule: {0}")]
    InvalidSchedule(&'static str),

    #[error("integration step {step} rejected: norm changed by factor {factor:e}")]
    StepRejected { step: usize, factor: f64 },

    #[error("states are nearly orthogonal: |<psi1|psi2>| / (|psi1||psi2|) = {0:e}")]
    NearOrthogonal(f64),

    #[error("curvature depends on the integrated-out parameter (deviation {0:e})")]
    CurvatureNotUniform(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Expr(#[from] ParseError),
}
