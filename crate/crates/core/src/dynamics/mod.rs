//! Full-order models: the semi-discrete systems `du/dt = R(u)`.

pub mod dual;
pub mod euler1d;
pub mod lti;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use crate::error::{RomError, Result};

pub use euler1d::{Euler1d, Euler1dConfig};
pub use lti::{make_diffusion_lti, LtiSystem};

/// A semi-discrete full-order model.
pub trait FomSystem: Send + Sync {
    fn dim(&self) -> usize;

    /// Right-hand side `R(u)`.
    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Exact Jacobian action `J(u) v`.
    fn jac_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;

    /// Dense Jacobian, for verification and small systems.
    fn jac_dense(&self, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Err(RomError::DenseJacobianUnavailable)
    }

    /// `J(u) V` for a block of directions.
    fn jac_mul(&self, u: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::<f64>::zeros(self.dim(), v.ncols());
        for j in 0..v.ncols() {
            let col = self.jac_vec(u, &v.column(j).clone_owned())?;
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// `(d/dε J(u + εw)) V` at `ε = 0`; finite differences unless overridden.
    fn jac_dir_mul(&self, u: &DVector<f64>, w: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let wn = w.amax();
        if wn == 0.0 {
            return Ok(DMatrix::zeros(self.dim(), v.ncols()));
        }
        let eps = 1e-7 * u.amax().max(1.0) / wn;
        let mut shifted = u.clone();
        shifted.axpy(eps, w, 1.0);
        Ok((self.jac_mul(&shifted, v)? - self.jac_mul(u, v)?) / eps)
    }
}

/// A system whose right-hand side can be evaluated on a subset of rows.
pub trait SampledSystem: FomSystem {
    /// Sorted state rows needed to evaluate `R` at `rows` (a superset of `rows`).
    fn stencil(&self, rows: &[usize]) -> Vec<usize>;

    /// `R(u)` at `rows`, given the state on `stencil` only.
    fn rhs_rows(&self, stencil: &[usize], u_stencil: &[f64], rows: &[usize]) -> Result<DVector<f64>>;

    /// Exact `J(u) v` at `rows`, given state and direction on `stencil`.
    fn jac_vec_rows(
        &self,
        stencil: &[usize],
        u_stencil: &[f64],
        v_stencil: &[f64],
        rows: &[usize],
    ) -> Result<DVector<f64>>;

    /// Group id for each row; rows sharing an id belong to the same cell.
    fn cell_map(&self) -> Vec<usize>;
}

/// Finite-difference Jacobian action `(R(u + εv) - R(u)) / ε`.
pub fn jac_vec_fd<S: FomSystem + ?Sized>(
    sys: &S,
    u: &DVector<f64>,
    v: &DVector<f64>,
    eps: f64,
) -> Result<DVector<f64>> {
    let base = sys.rhs(u)?;
    jac_vec_fd_with_base(sys, u, &base, v, eps)
}

/// Finite-difference Jacobian action reusing an already evaluated `R(u)`.
pub fn jac_vec_fd_with_base<S: FomSystem + ?Sized>(
    sys: &S,
    u: &DVector<f64>,
    base: &DVector<f64>,
    v: &DVector<f64>,
    eps: f64,
) -> Result<DVector<f64>> {
    let mut up = u.clone();
    up.axpy(eps, v, 1.0);
    Ok((sys.rhs(&up)? - base) / eps)
}

/// A full-order model viewed as an ODE for the time integrators.
pub struct FomOde<'a, S: ?Sized>(pub &'a S);

impl<S: FomSystem + ?Sized> crate::timeint::OdeSystem for FomOde<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn f(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.rhs(y)
    }
    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.0.jac_dense(y)
    }
}

/// Wrapper that counts right-hand-side rows evaluated and the distinct rows touched.
pub struct CountingSystem<S> {
    pub inner: S,
    rows: AtomicUsize,
    full_calls: AtomicUsize,
    touched: Mutex<BTreeSet<usize>>,
}

impl<S> CountingSystem<S> {
    pub fn new(inner: S) -> Self {
        CountingSystem { inner, rows: AtomicUsize::new(0), full_calls: AtomicUsize::new(0), touched: Mutex::new(BTreeSet::new()) }
    }

    /// Total rows evaluated, counting repeats.
    pub fn rows_evaluated(&self) -> usize {
        self.rows.load(Ordering::Relaxed)
    }

    /// Number of distinct rows evaluated.
    pub fn distinct_rows(&self) -> usize {
        self.touched.lock().expect("counter lock").len()
    }

    /// Calls that evaluated the whole system.
    pub fn full_calls(&self) -> usize {
        self.full_calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.rows.store(0, Ordering::Relaxed);
        self.full_calls.store(0, Ordering::Relaxed);
        self.touched.lock().expect("counter lock").clear();
    }

    fn record(&self, rows: &[usize]) {
        self.rows.fetch_add(rows.len(), Ordering::Relaxed);
        self.touched.lock().expect("counter lock").extend(rows.iter().copied());
    }
}

impl<S: FomSystem> CountingSystem<S> {
    fn record_full(&self) {
        let n = self.inner.dim();
        self.full_calls.fetch_add(1, Ordering::Relaxed);
        self.rows.fetch_add(n, Ordering::Relaxed);
        self.touched.lock().expect("counter lock").extend(0..n);
    }
}

impl<S: FomSystem> FomSystem for CountingSystem<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.record_full();
        self.inner.rhs(u)
    }
    fn jac_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.record_full();
        self.inner.jac_vec(u, v)
    }
    fn jac_dense(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.record_full();
        self.inner.jac_dense(u)
    }
    fn jac_mul(&self, u: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.record_full();
        self.inner.jac_mul(u, v)
    }
    fn jac_dir_mul(&self, u: &DVector<f64>, w: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.record_full();
        self.inner.jac_dir_mul(u, w, v)
    }
}

impl<S: SampledSystem> SampledSystem for CountingSystem<S> {
    fn stencil(&self, rows: &[usize]) -> Vec<usize> {
        self.inner.stencil(rows)
    }
    fn rhs_rows(&self, stencil: &[usize], u_stencil: &[f64], rows: &[usize]) -> Result<DVector<f64>> {
        self.record(rows);
        self.inner.rhs_rows(stencil, u_stencil, rows)
    }
    fn jac_vec_rows(
        &self,
        stencil: &[usize],
        u_stencil: &[f64],
        v_stencil: &[f64],
        rows: &[usize],
    ) -> Result<DVector<f64>> {
        self.record(rows);
        self.inner.jac_vec_rows(stencil, u_stencil, v_stencil, rows)
    }
    fn cell_map(&self) -> Vec<usize> {
        self.inner.cell_map()
    }
}

/// Position of `row` within a sorted stencil.
pub(crate) fn stencil_pos(stencil: &[usize], row: usize) -> Result<usize> {
    stencil.binary_search(&row).map_err(|_| RomError::StencilIncomplete { row })
}
