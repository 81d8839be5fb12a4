//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{RomError, Result};

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Infinity norm of a vector.
pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `aᵀ b` through an explicit transpose, which is far faster than `tr_mul` for tall operands.
pub fn at_b(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor `a`. Fails with the offending pivot when it drops below `rel_tol * max|a|`.
    pub fn factor(a: &DMatrix<f64>, rel_tol: f64) -> std::result::Result<Lu, f64> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let scale = max_abs(a);
        let threshold = rel_tol * scale;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) || best == 0.0 {
                return Err(best);
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..j {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        x
    }
}

/// Result of an unrestarted GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// The Arnoldi process hit an invariant subspace; the solution is exact in it.
    pub breakdown: bool,
}

/// GMRES from a zero initial guess, modified Gram-Schmidt, no restart.
pub fn gmres<F>(mut matvec: F, b: &DVector<f64>, max_iter: usize, rel_tol: f64) -> Result<GmresOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = b.len();
    let beta = b.norm();
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            breakdown: false,
        });
    }
    let m = max_iter.max(1);
    let mut basis: Vec<DVector<f64>> = vec![b / beta];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = DVector::<f64>::zeros(m + 1);
    g[0] = beta;
    let mut k_used = 0;
    let mut breakdown = false;
    for k in 0..m {
        let mut w = matvec(&basis[k])?;
        for (i, q) in basis.iter().enumerate() {
            let hik = w.dot(q);
            h[(i, k)] = hik;
            w.axpy(-hik, q, 1.0);
        }
        let hnorm = w.norm();
        h[(k + 1, k)] = hnorm;
        for i in 0..k {
            let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
            h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
            h[(i, k)] = t;
        }
        let denom = h[(k, k)].hypot(h[(k + 1, k)]);
        if denom == 0.0 {
            k_used = k;
            breakdown = true;
            break;
        }
        cs[k] = h[(k, k)] / denom;
        sn[k] = h[(k + 1, k)] / denom;
        h[(k, k)] = denom;
        h[(k + 1, k)] = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] *= cs[k];
        k_used = k + 1;
        if hnorm < 1e-14 {
            breakdown = true;
            break;
        }
        if g[k + 1].abs() <= rel_tol * beta {
            break;
        }
        basis.push(w / hnorm);
    }
    let mut y = DVector::<f64>::zeros(k_used);
    for i in (0..k_used).rev() {
        let mut s = g[i];
        for j in i + 1..k_used {
            s -= h[(i, j)] * y[j];
        }
        y[i] = s / h[(i, i)];
    }
    let mut x = DVector::<f64>::zeros(n);
    for (j, yj) in y.iter().enumerate() {
        x.axpy(*yj, &basis[j], 1.0);
    }
    Ok(GmresOutcome {
        x,
        iterations: k_used,
        residual: g[k_used].abs(),
        breakdown,
    })
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9]) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &id * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8]) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &id * B[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = p0;
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Thin-SVD pseudo-inverse with singular values below `rel_cutoff * σ₁` dropped.
/// Returns the pseudo-inverse and the retained rank.
pub fn pinv(a: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = DMatrix::<f64>::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * smax && s > 0.0 {
            rank += 1;
            let vi = vt.row(i).transpose();
            let ui = u.column(i);
            out += (vi / s) * ui.transpose();
        }
    }
    (out, rank)
}

/// Column order chosen by Householder QR with column pivoting.
pub fn pivoted_qr_order(a: &DMatrix<f64>) -> Vec<usize> {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| r.column(j).norm_squared()).collect();
    for k in 0..m.min(n) {
        let (p, _) = norms[k..]
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let p = p + k;
        if p != k {
            r.swap_columns(p, k);
            order.swap(p, k);
            norms.swap(p, k);
        }
        let x = r.view((k, k), (m - k, 1)).clone_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            break;
        }
        let mut v = x.column(0).clone_owned();
        v[0] += alpha.copysign(x[0]);
        let vn = v.norm();
        if vn == 0.0 {
            continue;
        }
        v /= vn;
        for j in k..n {
            let mut col = r.view_mut((k, j), (m - k, 1));
            let d = v.dot(&col.column(0));
            col.column_mut(0).axpy(-2.0 * d, &v, 1.0);
        }
        for j in k + 1..n {
            norms[j] = r.view((k + 1, j), (m - k - 1, 1)).norm_squared();
        }
    }
    order
}

/// Outcome of a spectral radius estimate.
#[derive(Debug, Clone, Copy)]
pub struct SpectralRadius {
    pub rho: f64,
    pub iterations: usize,
    /// Power iteration stalled and the value came from the full eigenvalue set.
    pub used_eigen_fallback: bool,
}

/// Spectral radius by power iteration, falling back to a Schur eigenvalue solve when
/// the iteration does not settle (e.g. a complex dominant pair).
pub fn spectral_radius(a: &DMatrix<f64>, max_iter: usize, rel_tol: f64) -> SpectralRadius {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::<f64>::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    x /= x.norm();
    let mut prev = 0.0_f64;
    for it in 1..=max_iter {
        let y = a * &x;
        let est = y.norm();
        if est == 0.0 {
            return SpectralRadius { rho: 0.0, iterations: it, used_eigen_fallback: false };
        }
        if it > 1 && (est - prev).abs() <= rel_tol * est {
            return SpectralRadius { rho: est, iterations: it, used_eigen_fallback: false };
        }
        prev = est;
        x = y / est;
    }
    let rho = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    SpectralRadius { rho, iterations: max_iter, used_eigen_fallback: true }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = a.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[idx[i]]);
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest deviation of `vᵀv` from the identity.
pub fn orthonormality_defect(v: &DMatrix<f64>) -> f64 {
    let g = at_b(v, v);
    let k = g.nrows();
    max_abs(&(g - DMatrix::<f64>::identity(k, k)))
}

/// Random matrix with orthonormal columns from a seeded generator.
pub fn random_orthonormal<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q().columns(0, k).clone_owned()
}

/// Random symmetric negative-definite matrix with spectrum in `[lo, hi]` (both negative).
pub fn random_negative_spd<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let q = random_orthonormal(n, n, rng);
    let d = DVector::<f64>::from_fn(n, |_, _| rng.random_range(lo..hi));
    let a = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub(crate) fn singular_to_err(pivot: f64) -> RomError {
    RomError::SingularJacobian { pivot }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn lu_solves_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::<f64>::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::<f64>::from_fn(12, |i, _| i as f64 - 3.0);
        let b = &a * &x;
        let lu = Lu::factor(&a, 1e-14).unwrap();
        assert!((lu.solve(&b) - x).amax() < 1e-10);
    }

    #[test]
    fn lu_flags_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Lu::factor(&a, 1e-14).is_err());
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::<f64>::from_fn(10, 10, |i, j| if i == j { 5.0 } else { rng.random_range(-1.0..1.0) });
        let b = DVector::<f64>::from_fn(10, |i, _| (i as f64).sin());
        let out = gmres(|v| Ok(&a * v), &b, 10, 1e-13).unwrap();
        let direct = a.clone().lu().solve(&b).unwrap();
        assert!((out.x - direct).amax() < 1e-10);
    }

    #[test]
    fn gmres_breakdown_on_invariant_subspace() {
        let a = DMatrix::<f64>::identity(5, 5) * 2.0;
        let b = DVector::<f64>::from_element(5, 1.0);
        let out = gmres(|v| Ok(&a * v), &b, 5, 1e-14).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.x - DVector::from_element(5, 0.5)).amax() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, -30.0]));
        let e = expm(&d);
        assert!((e[(0, 0)] - (-1.0f64).exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - 0.5f64.exp()).abs() < 1e-14);
        assert!((e[(2, 2)] - (-30.0f64).exp()).abs() < 1e-25);
        let w = 7.3;
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]);
        let er = expm(&r);
        assert!((er[(0, 0)] - w.cos()).abs() < 1e-12);
        assert!((er[(1, 0)] - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_matches_eigen_oracle_on_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_negative_spd(8, -40.0, -0.1, &mut rng);
        let (vals, vecs) = sym_eigen_desc(&a);
        let oracle = &vecs * DMatrix::from_diagonal(&vals.map(f64::exp)) * vecs.transpose();
        assert!((expm(&a) - oracle).amax() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(64);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        let p: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((p - 2.0 / 11.0).abs() < 1e-13);
        let (x3, w3) = gauss_legendre(3);
        assert!((x3[0] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn pinv_of_full_rank_tall_matrix_is_left_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::<f64>::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 4);
        assert!((p * a - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn pivoted_qr_picks_largest_column_first() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 5.0, 0.0, 1.0, 0.0]);
        let order = pivoted_qr_order(&a);
        assert_eq!(order[0], 2);
        assert_eq!(order[1], 1);
    }

    #[test]
    fn spectral_radius_of_scaled_identity() {
        let a = DMatrix::<f64>::identity(6, 6) * -10.0;
        let r = spectral_radius(&a, 200, 1e-8);
        assert!((r.rho - 10.0).abs() < 1e-10);
        assert!(!r.used_eigen_fallback);
    }

    #[test]
    fn spectral_radius_falls_back_on_rotation() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        let out = spectral_radius(&r, 200, 1e-8);
        assert!((out.rho - 3.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn random_orthonormal_is_orthonormal(seed in 0u64..1000, n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 1 + (seed as usize) % n;
            let v = random_orthonormal(n, k, &mut rng);
            prop_assert!(orthonormality_defect(&v) < 1e-12);
        }
    }
}
