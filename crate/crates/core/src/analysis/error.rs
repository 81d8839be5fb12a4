//! ROM error against a projected FOM reference.

use nalgebra::DVector;

use crate::basis::TrialBasis;
use crate::error::{RomError, Result};
use crate::rom::RomRun;

/// FOM trajectory projected onto the trial space, `Ṽᵀ u_F(t)`.
#[derive(Debug, Clone)]
pub struct ProjectedReference {
    pub times: Vec<f64>,
    pub coords: Vec<DVector<f64>>,
}

impl ProjectedReference {
    pub fn new(basis: &TrialBasis, times: &[f64], states: &[DVector<f64>]) -> Result<Self> {
        if times.len() != states.len() {
            return Err(RomError::DimensionMismatch { expected: times.len(), got: states.len() });
        }
        Ok(ProjectedReference { times: times.to_vec(), coords: states.iter().map(|u| basis.reduce(u)).collect() })
    }

    /// Index of the reference sample at time `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Pointwise error history and its time integral.
#[derive(Debug, Clone)]
pub struct ErrorHistory {
    pub times: Vec<f64>,
    /// `‖Ṽ ã(t) - Π̃ u_F(t)‖₂` at each saved time.
    pub errors: Vec<f64>,
    /// Left Riemann sum of the errors over the saved times.
    pub integrated: f64,
}

/// Error of a ROM run against the projected reference on an identical time grid.
pub fn error_norm(rom: &RomRun, reference: &ProjectedReference) -> Result<ErrorHistory> {
    let n = rom.times.len().min(reference.times.len());
    if rom.times.len() != reference.times.len() {
        return Err(RomError::TimeGridMismatch {
            index: n,
            left: rom.times.get(n).copied().unwrap_or(f64::NAN),
            right: reference.times.get(n).copied().unwrap_or(f64::NAN),
        });
    }
    for (i, (&a, &b)) in rom.times.iter().zip(&reference.times).enumerate() {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(RomError::TimeGridMismatch { index: i, left: a, right: b });
        }
    }
    // The basis is orthonormal, so ‖Ṽ(ã - Ṽᵀu)‖ = ‖ã - Ṽᵀu‖.
    let errors: Vec<f64> = rom.coords.iter().zip(&reference.coords).map(|(a, r)| (a - r).norm()).collect();
    let integrated = left_riemann(&rom.times, &errors);
    Ok(ErrorHistory { times: rom.times.clone(), errors, integrated })
}

/// `Σ f(t_i) (t_{i+1} - t_i)`.
pub fn left_riemann(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values).map(|(w, v)| v * (w[1] - w[0])).sum()
}
