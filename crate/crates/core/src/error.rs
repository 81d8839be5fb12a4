//! Error type shared by every module.

use nalgebra::DVector;
use thiserror::Error;

/// Errors raised by the model, solver and analysis layers.
#[derive(Debug, Error)]
pub enum RomError {
    #[error("non-physical state in cell {cell}: density {density}, internal energy {internal_energy}")]
    NonPhysicalState {
        cell: usize,
        density: f64,
        internal_energy: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Newton failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },
    #[error("singular Jacobian (pivot {pivot:e})")]
    SingularJacobian { pivot: f64 },
    #[error("snapshot matrix is empty")]
    EmptySnapshots,
    #[error("energy criterion {0} outside (0, 1]")]
    InvalidCriterion(f64),
    #[error("basis blocks overlap at row {row}")]
    OverlappingBlocks { row: usize },
    #[error("basis block {block} is not orthonormal (deviation {deviation:e})")]
    NonOrthonormalBlock { block: usize, deviation: f64 },
    #[error("system does not provide a dense Jacobian")]
    DenseJacobianUnavailable,
    #[error("rank-deficient normal equations (pivot {pivot:e})")]
    RankDeficientNormalEquations { pivot: f64 },
    #[error("spectral radius {0:e} is numerically zero")]
    ZeroSpectralRadius(f64),
    #[error("requested {requested} sampling modes but snapshot rank is {rank}")]
    RankDeficientSampling { requested: usize, rank: usize },
    #[error("state row {row} lies outside the supplied stencil")]
    StencilIncomplete { row: usize },
    #[error("time grids differ at index {index}: {left} vs {right}")]
    TimeGridMismatch { index: usize, left: f64, right: f64 },
    #[error("every run in the sweep was unstable")]
    AllRunsUnstable,
    #[error("reduced operator is not diagonalizable (condition {0:e})")]
    NonDiagonalizable(f64),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("quadrature did not converge (last change {0:e})")]
    QuadratureNotConverged(f64),
    #[error("invalid window: t = {t} must exceed tau = {tau}")]
    InvalidWindow { t: f64, tau: f64 },
    #[error("solution diverged at t = {t} (max |a| = {max_abs:e})")]
    Diverged { t: f64, max_abs: f64 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RomError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(RomError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}
