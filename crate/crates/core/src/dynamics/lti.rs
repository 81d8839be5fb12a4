//! Linear time-invariant systems `du/dt = A u`.

use nalgebra::{DMatrix, DVector};

use super::{stencil_pos, FomSystem, SampledSystem};
use crate::error::{check_dim, RomError, Result};
use crate::linalg::sym_eigen_desc;

#[derive(Debug, Clone)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    self_adjoint: bool,
    /// Eigenvalues in descending order, cached for self-adjoint operators.
    eigenvalues: Option<DVector<f64>>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(RomError::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let scale = crate::linalg::max_abs(&a).max(1.0);
        let self_adjoint = crate::linalg::max_abs(&(&a - a.transpose())) <= 1e-14 * scale;
        let eigenvalues = self_adjoint.then(|| sym_eigen_desc(&a).0);
        Ok(LtiSystem { a, self_adjoint, eigenvalues })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn eigenvalues(&self) -> Option<&DVector<f64>> {
        self.eigenvalues.as_ref()
    }
}

/// Second-difference diffusion operator `(1/dx²) tridiag(1, -2, 1)` with Dirichlet ends.
pub fn make_diffusion_lti(n: usize, dx: f64) -> Result<LtiSystem> {
    if n < 2 {
        return Err(RomError::InvalidArgument(format!("diffusion needs n >= 2, got {n}")));
    }
    if !(dx > 0.0) {
        return Err(RomError::InvalidArgument(format!("dx must be positive, got {dx}")));
    }
    let s = 1.0 / (dx * dx);
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * s
        } else if i.abs_diff(j) == 1 {
            s
        } else {
            0.0
        }
    });
    LtiSystem::new(a)
}

impl FomSystem for LtiSystem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), u.len())?;
        Ok(&self.a * u)
    }

    fn jac_vec(&self, _u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.a * v)
    }

    fn jac_dense(&self, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }

    fn jac_mul(&self, _u: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), v.nrows())?;
        Ok(&self.a * v)
    }

    fn jac_dir_mul(&self, _u: &DVector<f64>, _w: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), v.nrows())?;
        Ok(DMatrix::zeros(self.dim(), v.ncols()))
    }
}

impl SampledSystem for LtiSystem {
    fn stencil(&self, rows: &[usize]) -> Vec<usize> {
        let mut cols: Vec<usize> = rows
            .iter()
            .flat_map(|&r| (0..self.dim()).filter(move |&c| self.a[(r, c)] != 0.0 || c == r))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    fn rhs_rows(&self, stencil: &[usize], u_stencil: &[f64], rows: &[usize]) -> Result<DVector<f64>> {
        check_dim(stencil.len(), u_stencil.len())?;
        let mut out = DVector::zeros(rows.len());
        for (k, &r) in rows.iter().enumerate() {
            let mut s = 0.0;
            for c in 0..self.dim() {
                let a = self.a[(r, c)];
                if a != 0.0 {
                    s += a * u_stencil[stencil_pos(stencil, c)?];
                }
            }
            out[k] = s;
        }
        Ok(out)
    }

    fn jac_vec_rows(
        &self,
        stencil: &[usize],
        _u_stencil: &[f64],
        v_stencil: &[f64],
        rows: &[usize],
    ) -> Result<DVector<f64>> {
        self.rhs_rows(stencil, v_stencil, rows)
    }

    fn cell_map(&self) -> Vec<usize> {
        (0..self.dim()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusion_spectrum_matches_closed_form() {
        let n = 16;
        let dx = 1.0 / 17.0;
        let sys = make_diffusion_lti(n, dx).unwrap();
        assert!(sys.is_self_adjoint());
        let eig = sys.eigenvalues().unwrap();
        for k in 1..=n {
            let exact = (-2.0 + 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos()) / (dx * dx);
            assert!((eig[k - 1] - exact).abs() < 1e-9 * exact.abs());
        }
    }

    #[test]
    fn diffusion_rejects_bad_arguments() {
        assert!(matches!(make_diffusion_lti(1, 0.1), Err(RomError::InvalidArgument(_))));
        assert!(matches!(make_diffusion_lti(4, 0.0), Err(RomError::InvalidArgument(_))));
    }

    #[test]
    fn stencil_rows_match_matvec() {
        let sys = make_diffusion_lti(10, 0.1).unwrap();
        let u = DVector::from_fn(10, |i, _| (i as f64 * 0.7).sin());
        let rows = vec![0, 4, 9];
        let st = sys.stencil(&rows);
        assert_eq!(st, vec![0, 1, 3, 4, 5, 8, 9]);
        let us: Vec<f64> = st.iter().map(|&s| u[s]).collect();
        let part = sys.rhs_rows(&st, &us, &rows).unwrap();
        let full = sys.rhs(&u).unwrap();
        for (k, &r) in rows.iter().enumerate() {
            assert!((part[k] - full[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsymmetric_operator_has_no_cached_spectrum() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let sys = LtiSystem::new(a).unwrap();
        assert!(!sys.is_self_adjoint());
        assert!(sys.eigenvalues().is_none());
    }
}
