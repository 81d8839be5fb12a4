//! One-dimensional Euler equations, first-order finite volume with a Roe flux.
//!
//! State layout is variable-major: `[ρ_0..ρ_{n-1}, (ρu)_0.., (ρE)_0..]`.
//! Both ends are reflecting walls, implemented with mirrored ghost cells.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dual::{Dual, HyperDual, Real};
use super::{stencil_pos, FomSystem, SampledSystem};
use crate::error::{RomError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Euler1dConfig {
    pub n_cells: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub gamma: f64,
    /// Harten entropy fix on the Roe eigenvalues.
    pub entropy_fix: bool,
    /// Fix width as a fraction of the Roe sound speed.
    pub entropy_fix_delta: f64,
}

impl Default for Euler1dConfig {
    fn default() -> Self {
        Euler1dConfig {
            n_cells: 1000,
            x_min: 0.0,
            x_max: 1.0,
            gamma: 1.4,
            entropy_fix: false,
            entropy_fix_delta: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Euler1d {
    cfg: Euler1dConfig,
    dx: f64,
}

/// Sparse Jacobian with one 3-cell × 3-variable band per row.
#[derive(Debug, Clone)]
pub struct BandedJacobian {
    n_cells: usize,
    /// Entry `e = dc * 3 + a` of row `r` is `∂R_r / ∂u[a * n + (cell(r) - 1 + dc)]`.
    entries: Vec<[f64; 9]>,
}

impl BandedJacobian {
    fn col(&self, r: usize, e: usize) -> Option<usize> {
        let n = self.n_cells;
        let cell = r % n;
        let c = (cell + e / 3).checked_sub(1)?;
        if c >= n {
            return None;
        }
        Some((e % 3) * n + c)
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.entries.len(), |r, _| {
            (0..9)
                .filter_map(|e| self.col(r, e).map(|c| self.entries[r][e] * v[c]))
                .sum()
        })
    }

    pub fn mul_mat(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_cells;
        let rows = self.entries.len();
        let bands: Vec<Vec<f64>> = (0..9).map(|e| self.entries.iter().map(|row| row[e]).collect()).collect();
        let mut out = DMatrix::<f64>::zeros(rows, v.ncols());
        for (src, dst) in v.as_slice().chunks_exact(rows).zip(out.as_mut_slice().chunks_exact_mut(rows)) {
            for (e, band) in bands.iter().enumerate() {
                let col0 = (e % 3) * n;
                let shift = e / 3;
                let (lo, hi) = match shift {
                    0 => (1, n),
                    1 => (0, n),
                    _ => (0, n - 1),
                };
                let len = hi - lo;
                let x = &src[col0 + lo + shift - 1..][..len];
                for rv in 0..3 {
                    let start = rv * n + lo;
                    for ((d, b), xv) in dst[start..start + len].iter_mut().zip(&band[start..start + len]).zip(x) {
                        *d += b * xv;
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.entries.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for e in 0..9 {
                if let Some(c) = self.col(r, e) {
                    m[(r, c)] = self.entries[r][e];
                }
            }
        }
        m
    }
}

impl Euler1d {
    pub fn new(cfg: Euler1dConfig) -> Result<Self> {
        if cfg.n_cells < 2 {
            return Err(RomError::InvalidArgument("n_cells must be at least 2".into()));
        }
        if !(cfg.x_max > cfg.x_min) {
            return Err(RomError::InvalidArgument("x_max must exceed x_min".into()));
        }
        if !(cfg.gamma > 1.0) {
            return Err(RomError::InvalidArgument("gamma must exceed 1".into()));
        }
        let dx = (cfg.x_max - cfg.x_min) / cfg.n_cells as f64;
        Ok(Euler1d { cfg, dx })
    }

    /// Sod shock tube on the default grid.
    pub fn sod() -> Self {
        Self::new(Euler1dConfig::default()).expect("default config is valid")
    }

    pub fn config(&self) -> &Euler1dConfig {
        &self.cfg
    }

    pub fn n_cells(&self) -> usize {
        self.cfg.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.cfg.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Conserved state from primitive profiles.
    pub fn from_primitive(&self, mut prim: impl FnMut(f64) -> (f64, f64, f64)) -> DVector<f64> {
        let n = self.cfg.n_cells;
        let mut u = DVector::zeros(3 * n);
        for i in 0..n {
            let (rho, vel, p) = prim(self.cell_center(i));
            u[i] = rho;
            u[n + i] = rho * vel;
            u[2 * n + i] = p / (self.cfg.gamma - 1.0) + 0.5 * rho * vel * vel;
        }
        u
    }

    /// Sod initial condition: (ρ, p) = (1, 1) left of 0.5 and (0.125, 0.1) right of it.
    pub fn sod_initial_condition(&self) -> DVector<f64> {
        self.from_primitive(|x| if x <= 0.5 { (1.0, 0.0, 1.0) } else { (0.125, 0.0, 0.1) })
    }

    /// Physical flux `F(w)`.
    pub fn physical_flux<T: Real>(&self, w: [T; 3]) -> [T; 3] {
        let g = T::cst(self.cfg.gamma - 1.0);
        let u = w[1] / w[0];
        let p = g * (w[2] - T::cst(0.5) * w[1] * u);
        [w[1], w[1] * u + p, u * (w[2] + p)]
    }

    fn check_state<T: Real>(&self, w: &[T; 3], cell: usize) -> Result<()> {
        let rho = w[0].val();
        let internal = w[2].val() - 0.5 * w[1].val() * w[1].val() / rho;
        if !(rho > 0.0) || !(internal > 0.0) {
            return Err(RomError::NonPhysicalState { cell, density: rho, internal_energy: internal });
        }
        Ok(())
    }

    /// Roe numerical flux between a left and right state.
    pub fn roe_flux<T: Real>(&self, l: [T; 3], r: [T; 3]) -> Result<[T; 3]> {
        let gm1 = self.cfg.gamma - 1.0;
        let half = T::cst(0.5);
        let ul = l[1] / l[0];
        let ur = r[1] / r[0];
        let pl = T::cst(gm1) * (l[2] - half * l[1] * ul);
        let pr = T::cst(gm1) * (r[2] - half * r[1] * ur);
        let hl = (l[2] + pl) / l[0];
        let hr = (r[2] + pr) / r[0];
        let sl = l[0].sqrt();
        let sr = r[0].sqrt();
        let ssum = sl + sr;
        let ut = (sl * ul + sr * ur) / ssum;
        let ht = (sl * hl + sr * hr) / ssum;
        let rt = sl * sr;
        let c2 = T::cst(gm1) * (ht - half * ut * ut);
        if !(c2.val() > 0.0) {
            return Err(RomError::NonPhysicalState {
                cell: usize::MAX,
                density: rt.val(),
                internal_energy: c2.val(),
            });
        }
        let c = c2.sqrt();
        let dr = r[0] - l[0];
        let du = ur - ul;
        let dp = pr - pl;
        let two_c2 = T::cst(2.0) * c2;
        let a1 = (dp - rt * c * du) / two_c2;
        let a2 = dr - dp / c2;
        let a3 = (dp + rt * c * du) / two_c2;
        let mut l1 = (ut - c).abs();
        let mut l2 = ut.abs();
        let mut l3 = (ut + c).abs();
        if self.cfg.entropy_fix {
            let delta = T::cst(self.cfg.entropy_fix_delta) * c;
            let fix = |lam: T| {
                if lam.val() < delta.val() {
                    (lam * lam + delta * delta) / (T::cst(2.0) * delta)
                } else {
                    lam
                }
            };
            l1 = fix(l1);
            l2 = fix(l2);
            l3 = fix(l3);
        }
        let fl = self.physical_flux(l);
        let fr = self.physical_flux(r);
        let w1 = l1 * a1;
        let w2 = l2 * a2;
        let w3 = l3 * a3;
        let d0 = w1 + w2 + w3;
        let d1 = w1 * (ut - c) + w2 * ut + w3 * (ut + c);
        let d2 = w1 * (ht - ut * c) + w2 * half * ut * ut + w3 * (ht + ut * c);
        Ok([
            half * (fl[0] + fr[0] - d0),
            half * (fl[1] + fr[1] - d1),
            half * (fl[2] + fr[2] - d2),
        ])
    }

    fn mirror<T: Real>(w: [T; 3]) -> [T; 3] {
        [w[0], -w[1], w[2]]
    }

    /// Flux at interface `j`, between cells `j - 1` and `j`.
    fn interface_flux<T: Real>(&self, cell: &impl Fn(usize) -> Result<[T; 3]>, j: usize) -> Result<[T; 3]> {
        let n = self.cfg.n_cells;
        let (l, r) = if j == 0 {
            let w = cell(0)?;
            (Self::mirror(w), w)
        } else if j == n {
            let w = cell(n - 1)?;
            (w, Self::mirror(w))
        } else {
            (cell(j - 1)?, cell(j)?)
        };
        self.roe_flux(l, r)
    }

    fn rhs_generic<T: Real>(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.cfg.n_cells;
        let cell = |i: usize| -> Result<[T; 3]> { Ok([u[i], u[n + i], u[2 * n + i]]) };
        for i in 0..n {
            self.check_state(&cell(i)?, i)?;
        }
        let fluxes: Vec<[T; 3]> = (0..=n)
            .map(|j| self.interface_flux(&cell, j))
            .collect::<Result<_>>()?;
        let inv_dx = T::cst(1.0 / self.dx);
        let mut out = vec![T::cst(0.0); 3 * n];
        for i in 0..n {
            for v in 0..3 {
                out[v * n + i] = -(fluxes[i + 1][v] - fluxes[i][v]) * inv_dx;
            }
        }
        Ok(out)
    }

    fn rows_generic<T: Real>(&self, stencil: &[usize], u_s: &[T], rows: &[usize]) -> Result<Vec<T>> {
        let n = self.cfg.n_cells;
        let cell = |i: usize| -> Result<[T; 3]> {
            let w = [
                u_s[stencil_pos(stencil, i)?],
                u_s[stencil_pos(stencil, n + i)?],
                u_s[stencil_pos(stencil, 2 * n + i)?],
            ];
            self.check_state(&w, i)?;
            Ok(w)
        };
        let inv_dx = T::cst(1.0 / self.dx);
        let mut cached: Option<(usize, [T; 3])> = None;
        let mut out = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= 3 * n {
                return Err(RomError::DimensionMismatch { expected: 3 * n, got: r + 1 });
            }
            let i = r % n;
            let div = match cached {
                Some((c, d)) if c == i => d,
                _ => {
                    let fr = self.interface_flux(&cell, i + 1)?;
                    let fl = self.interface_flux(&cell, i)?;
                    let d = [fr[0] - fl[0], fr[1] - fl[1], fr[2] - fl[2]];
                    cached = Some((i, d));
                    d
                }
            };
            out.push(-div[r / n] * inv_dx);
        }
        Ok(out)
    }

    /// Nine colored sweeps: `seed(k, hit)` builds the input at row `k`, `take` reads one
    /// output into the band entry of every column hit by the current color.
    fn banded_sweeps<T: Real>(
        &self,
        seed: impl Fn(usize, bool) -> T,
        take: impl Fn(&T) -> f64,
    ) -> Result<BandedJacobian> {
        let n = self.cfg.n_cells;
        let mut entries = vec![[0.0; 9]; 3 * n];
        for color in 0..3 {
            for a in 0..3 {
                let seeded: Vec<T> = (0..3 * n).map(|k| seed(k, k / n == a && (k % n) % 3 == color)).collect();
                let out = self.rhs_generic(&seeded)?;
                for (r, val) in out.iter().enumerate() {
                    let i = r % n;
                    for dc in 0..3 {
                        let Some(c) = (i + dc).checked_sub(1) else { continue };
                        if c < n && c % 3 == color {
                            entries[r][dc * 3 + a] = take(val);
                        }
                    }
                }
            }
        }
        Ok(BandedJacobian { n_cells: n, entries })
    }

    /// Exact banded Jacobian, assembled from nine colored tangent sweeps.
    pub fn banded_jacobian(&self, u: &DVector<f64>) -> Result<BandedJacobian> {
        self.check_dim(u)?;
        self.banded_sweeps(|k, hit| Dual::new(u[k], if hit { 1.0 } else { 0.0 }), |d| d.d)
    }

    /// Directional derivative `d/dε J(u + εw)` at `ε = 0`, which shares the Jacobian band.
    /// Kinks take the branch of `u`.
    pub fn banded_jacobian_derivative(&self, u: &DVector<f64>, w: &DVector<f64>) -> Result<BandedJacobian> {
        self.check_dim(u)?;
        self.check_dim(w)?;
        self.banded_sweeps(
            |k, hit| HyperDual::new(Dual::new(u[k], w[k]), Dual::new(if hit { 1.0 } else { 0.0 }, 0.0)),
            |h| h.d.d,
        )
    }

    fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        crate::error::check_dim(3 * self.cfg.n_cells, u.len())
    }
}

impl FomSystem for Euler1d {
    fn dim(&self) -> usize {
        3 * self.cfg.n_cells
    }

    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        Ok(DVector::from_vec(self.rhs_generic(u.as_slice())?))
    }

    fn jac_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        self.check_dim(v)?;
        let seeded: Vec<Dual> = u.iter().zip(v.iter()).map(|(&a, &b)| Dual::new(a, b)).collect();
        let out = self.rhs_generic(&seeded)?;
        Ok(DVector::from_iterator(out.len(), out.iter().map(|d| d.d)))
    }

    fn jac_dense(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.banded_jacobian(u)?.to_dense())
    }

    fn jac_mul(&self, u: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        crate::error::check_dim(self.dim(), v.nrows())?;
        Ok(self.banded_jacobian(u)?.mul_mat(v))
    }

    fn jac_dir_mul(&self, u: &DVector<f64>, w: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        crate::error::check_dim(self.dim(), v.nrows())?;
        Ok(self.banded_jacobian_derivative(u, w)?.mul_mat(v))
    }
}

impl SampledSystem for Euler1d {
    fn stencil(&self, rows: &[usize]) -> Vec<usize> {
        let n = self.cfg.n_cells;
        let mut cells: Vec<usize> = rows
            .iter()
            .flat_map(|&r| {
                let i = r % n;
                [i.checked_sub(1), Some(i), (i + 1 < n).then_some(i + 1)]
            })
            .flatten()
            .collect();
        cells.sort_unstable();
        cells.dedup();
        let mut out: Vec<usize> = (0..3).flat_map(|v| cells.iter().map(move |&c| v * n + c)).collect();
        out.sort_unstable();
        out
    }

    fn rhs_rows(&self, stencil: &[usize], u_stencil: &[f64], rows: &[usize]) -> Result<DVector<f64>> {
        crate::error::check_dim(stencil.len(), u_stencil.len())?;
        Ok(DVector::from_vec(self.rows_generic(stencil, u_stencil, rows)?))
    }

    fn jac_vec_rows(
        &self,
        stencil: &[usize],
        u_stencil: &[f64],
        v_stencil: &[f64],
        rows: &[usize],
    ) -> Result<DVector<f64>> {
        crate::error::check_dim(stencil.len(), u_stencil.len())?;
        crate::error::check_dim(stencil.len(), v_stencil.len())?;
        let seeded: Vec<Dual> = u_stencil
            .iter()
            .zip(v_stencil)
            .map(|(&a, &b)| Dual::new(a, b))
            .collect();
        let out = self.rows_generic(stencil, &seeded, rows)?;
        Ok(DVector::from_iterator(out.len(), out.iter().map(|d| d.d)))
    }

    fn cell_map(&self) -> Vec<usize> {
        let n = self.cfg.n_cells;
        (0..3 * n).map(|r| r % n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::jac_vec_fd;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(n: usize) -> Euler1d {
        Euler1d::new(Euler1dConfig { n_cells: n, ..Default::default() }).unwrap()
    }

    fn random_state(sys: &Euler1d, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = sys.n_cells();
        let prim: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.2..1.5), rng.random_range(-0.8..0.8), rng.random_range(0.1..1.2)))
            .collect();
        let mut k = 0;
        sys.from_primitive(|_| {
            let p = prim[k];
            k += 1;
            p
        })
    }

    #[test]
    fn sod_initial_state_values() {
        let sys = Euler1d::sod();
        let u = sys.sod_initial_condition();
        assert_eq!(u.len(), 3000);
        assert_eq!(u[0], 1.0);
        assert_eq!(u[499], 1.0);
        assert_eq!(u[500], 0.125);
        assert!((u[2000] - 2.5).abs() < 1e-15);
        assert!((u[2999] - 0.25).abs() < 1e-15);
        assert_eq!(u.rows(1000, 1000).amax(), 0.0);
    }

    #[test]
    fn uniform_state_is_steady() {
        let sys = small(20);
        let u = sys.from_primitive(|_| (0.7, 0.0, 0.4));
        assert!(sys.rhs(&u).unwrap().amax() < 1e-13);
    }

    #[test]
    fn wall_flux_carries_no_mass_or_energy() {
        let sys = small(10);
        let w = [0.9, 0.3, 2.1];
        let f = sys.roe_flux(Euler1d::mirror(w), w).unwrap();
        assert!(f[0].abs() < 1e-15);
        assert!(f[2].abs() < 1e-15);
    }

    #[test]
    fn nonphysical_state_is_rejected() {
        let sys = small(8);
        let mut u = sys.from_primitive(|_| (1.0, 0.0, 1.0));
        u[3] = -0.1;
        assert!(matches!(sys.rhs(&u), Err(RomError::NonPhysicalState { cell: 3, .. })));
        let mut u = sys.from_primitive(|_| (1.0, 0.0, 1.0));
        u[16 + 2] = 0.0;
        assert!(matches!(sys.rhs(&u), Err(RomError::NonPhysicalState { cell: 2, .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sys = small(8);
        let u = DVector::from_element(10, 1.0);
        assert!(matches!(sys.rhs(&u), Err(RomError::DimensionMismatch { expected: 24, got: 10 })));
    }

    #[test]
    fn sod_rhs_only_moves_the_diaphragm() {
        let sys = Euler1d::sod();
        let u = sys.sod_initial_condition();
        let r = sys.rhs(&u).unwrap();
        for i in 0..1000 {
            if i != 499 && i != 500 {
                assert!(r[i].abs() < 1e-12 && r[1000 + i].abs() < 1e-12 && r[2000 + i].abs() < 1e-12);
            }
        }
        assert!(r[1499] > 0.0 && r[1500] > 0.0);
    }

    #[test]
    fn exact_jacobian_matches_finite_difference() {
        let sys = small(12);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = random_state(&sys, &mut rng);
        let v = DVector::from_fn(36, |_, _| rng.random_range(-1.0..1.0));
        let exact = sys.jac_vec(&u, &v).unwrap();
        let h = 1e-6;
        let mut up = u.clone();
        up.axpy(h, &v, 1.0);
        let mut um = u.clone();
        um.axpy(-h, &v, 1.0);
        let central = (sys.rhs(&up).unwrap() - sys.rhs(&um).unwrap()) / (2.0 * h);
        assert!((exact.clone() - central).amax() < 1e-6 * (1.0 + exact.amax()));
        let fd = jac_vec_fd(&sys, &u, &v, 1e-5).unwrap();
        assert!((exact - fd).amax() < 1e-3);
    }

    #[test]
    fn jacobian_derivative_matches_central_difference() {
        let sys = small(10);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_state(&sys, &mut rng);
        let w = DVector::from_fn(30, |_, _| rng.random_range(-0.1..0.1));
        let d = sys.banded_jacobian_derivative(&u, &w).unwrap().to_dense();
        let h = 1e-6;
        let mut up = u.clone();
        up.axpy(h, &w, 1.0);
        let mut um = u.clone();
        um.axpy(-h, &w, 1.0);
        let central = (sys.jac_dense(&up).unwrap() - sys.jac_dense(&um).unwrap()) / (2.0 * h);
        assert!((&d - &central).amax() < 1e-5 * (1.0 + d.amax()));
        let v = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
        assert!((sys.jac_dir_mul(&u, &w, &v).unwrap() - &d * &v).amax() < 1e-10 * (1.0 + d.amax()));
    }

    #[test]
    fn jacobian_derivative_is_finite_at_rest() {
        let sys = Euler1d::new(Euler1dConfig { n_cells: 12, ..Default::default() }).unwrap();
        let u = sys.sod_initial_condition();
        let w = sys.rhs(&u).unwrap();
        let d = sys.banded_jacobian_derivative(&u, &w).unwrap();
        assert!(d.to_dense().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn banded_jacobian_matches_tangent_sweeps() {
        let sys = small(10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_state(&sys, &mut rng);
        let dense = sys.jac_dense(&u).unwrap();
        for j in 0..30 {
            let mut e = DVector::zeros(30);
            e[j] = 1.0;
            let col = sys.jac_vec(&u, &e).unwrap();
            assert!((dense.column(j) - col).amax() < 1e-12);
        }
        let v = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        assert!((sys.jac_mul(&u, &v).unwrap() - &dense * &v).amax() < 1e-12);
    }

    #[test]
    fn sampled_rows_match_full_rhs() {
        let sys = small(15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_state(&sys, &mut rng);
        let v = DVector::from_fn(45, |_, _| rng.random_range(-1.0..1.0));
        let rows = vec![0, 7, 14, 15, 22, 44];
        let stencil = sys.stencil(&rows);
        let us: Vec<f64> = stencil.iter().map(|&s| u[s]).collect();
        let vs: Vec<f64> = stencil.iter().map(|&s| v[s]).collect();
        let full = sys.rhs(&u).unwrap();
        let part = sys.rhs_rows(&stencil, &us, &rows).unwrap();
        let jfull = sys.jac_vec(&u, &v).unwrap();
        let jpart = sys.jac_vec_rows(&stencil, &us, &vs, &rows).unwrap();
        for (k, &r) in rows.iter().enumerate() {
            assert!((full[r] - part[k]).abs() < 1e-13);
            assert!((jfull[r] - jpart[k]).abs() < 1e-12);
        }
        let short = &stencil[1..];
        assert!(matches!(
            sys.rhs_rows(short, &us[1..], &rows),
            Err(RomError::StencilIncomplete { .. })
        ));
    }

    #[test]
    fn entropy_fix_changes_only_sonic_dissipation() {
        let on = Euler1d::new(Euler1dConfig { n_cells: 4, entropy_fix: true, ..Default::default() }).unwrap();
        let off = small(4);
        let l = [1.0, 2.0, 5.0];
        let r = [1.1, 2.0, 5.2];
        let a = on.roe_flux(l, r).unwrap();
        let b = off.roe_flux(l, r).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-14);
        let l = [1.0, 1.1, 2.6];
        let r = [0.9, 1.0, 2.3];
        let a = on.roe_flux(l, r).unwrap();
        let b = off.roe_flux(l, r).unwrap();
        assert!((a[0] - b[0]).abs() > 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn roe_flux_is_consistent(rho in 0.05f64..5.0, vel in -3.0f64..3.0, p in 0.05f64..5.0) {
            let sys = small(4);
            let w = [rho, rho * vel, p / 0.4 + 0.5 * rho * vel * vel];
            let f = sys.roe_flux(w, w).unwrap();
            let g = sys.physical_flux(w);
            for k in 0..3 {
                prop_assert!((f[k] - g[k]).abs() <= 1e-12 * (1.0 + g[k].abs()));
            }
        }

        #[test]
        fn density_is_conserved(seed in 0u64..10_000) {
            let sys = small(40);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_state(&sys, &mut rng);
            let r = sys.rhs(&u).unwrap();
            let total: f64 = r.rows(0, 40).iter().map(|x| x * sys.dx()).sum();
            let energy: f64 = r.rows(80, 40).iter().map(|x| x * sys.dx()).sum();
            prop_assert!(total.abs() < 1e-12);
            prop_assert!(energy.abs() < 1e-12);
        }
    }
}
