//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors reported by geometry, discretization, solver and driver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not a unit vector: |xhat| = {norm}")]
    NonUnitDirection { norm: f64 },
    #[error("degenerate surface: radial function r = {radius} is not positive")]
    DegenerateJacobian { radius: f64 },
    #[error("invalid shape parameters: {reason}")]
    InvalidShape { reason: String },
    #[error("invalid medium: {reason}")]
    InvalidMedium { reason: String },
    #[error("sample count mismatch: expected {expected}, got {actual}")]
    SampleCountMismatch { expected: usize, actual: usize },
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("projection degree must be at least 1, got {n}")]
    DegreeTooSmall { n: usize },
    #[error("operator degree n' = {n_prime} is below the admissible minimum n + 2 = {minimum}")]
    OperatorDegreeTooLow { n_prime: usize, minimum: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquareMatrix { rows: usize, cols: usize },
    #[error("matrix is singular: exact zero pivot in column {column}")]
    SingularMatrix { column: usize },
    #[error("the Mie series is undefined at zero frequency")]
    ZeroFrequency,
    #[error("polarization is not orthogonal to the incident direction: |d.p| = {dot}")]
    NonOrthogonalPolarization { dot: f64 },
    #[error("evaluation point lies {distance:e} from the surface, closer than the admissible {minimum:e}")]
    TooCloseToSurface { distance: f64, minimum: f64 },
    #[error("invalid configuration: {reason}")]
    Config { reason: String },
    #[error("malformed coefficient file: {reason}")]
    CoefficientFormat { reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
