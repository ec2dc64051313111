use thiserror::Error;

/// Errors raised by the solvers and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("dense decomposition failed to converge: {0}")]
    BackendFailure(&'static str),
    #[error("matrix is numerically rank deficient (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficient { ratio: f64 },
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("basis is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },
    #[error("overlap with the reference subspace is singular (sigma_min = {sigma_min:.3e})")]
    SingularOverlap { sigma_min: f64 },
    #[error("a canonical angle equals pi/2; tangent is undefined")]
    AngleAtPiOverTwo,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not a solution: residual {residual:.3e} exceeds {tol:.3e}")]
    NotASolution { residual: f64, tol: f64 },
    #[error("eigenvalue gap {delta:.3e} is not positive")]
    GapViolation { delta: f64 },
    #[error("history has {available} values, need at least {required}")]
    InsufficientHistory { available: usize, required: usize },
    #[error("error sequence contains a non-positive value at index {index}")]
    NonPositiveError { index: usize },
    #[error("shift {sigma} is outside (-delta*, inf) with delta* = {delta_star}")]
    ShiftOutOfRange { sigma: f64, delta_star: f64 },
    #[error("operator dimension {dim} exceeds the dense cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("operator is not self-adjoint (relative defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("invalid spectrum: mu_min = {mu_min}, mu_max = {mu_max}")]
    InvalidSpectrum { mu_min: f64, mu_max: f64 },
    #[error("no root of the optimal-shift equation in (-delta*, inf)")]
    NoRootInRange,
    #[error("could not certify a solution: {0}")]
    CertificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
