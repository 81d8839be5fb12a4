//! Gappy-POD hyper-reduction and collocated LSPG.

use nalgebra::{DMatrix, DVector};

use crate::basis::{pod_build, TrialBasis};
use crate::dynamics::{FomSystem, SampledSystem};
use crate::error::{check_dim, RomError, Result};
use crate::linalg::{pinv, pivoted_qr_order};
use crate::rom::{gauss_newton, march, run_reduced_ode, GaussNewtonOptions, GaussNewtonReport, JacMode, LspgScheme, RomRun, RomRunOptions, StepWork};
use crate::timeint::OdeSystem;

/// Offline data for the gappy-POD right-hand side approximation.
#[derive(Debug, Clone)]
pub struct HyperData {
    /// Right-hand side basis `U` (N × r).
    pub u_basis: DMatrix<f64>,
    /// Sorted sampled rows (`P`).
    pub sample_indices: Vec<usize>,
    /// Sorted rows needed to evaluate the sampled rows (`P_s`).
    pub stencil_indices: Vec<usize>,
    /// `[Pᵀ U]⁺` (r × N_p).
    pub pinv: DMatrix<f64>,
    /// `Ṽᵀ U` (K × r).
    pub proj_precomp: DMatrix<f64>,
    /// Singular values of the right-hand side snapshots, all of them.
    pub rhs_singular_values: DVector<f64>,
    u_stencil: DMatrix<f64>,
    v_stencil: DMatrix<f64>,
    v_sample: DMatrix<f64>,
}

impl HyperData {
    pub fn n_samples(&self) -> usize {
        self.sample_indices.len()
    }

    pub fn n_stencil(&self) -> usize {
        self.stencil_indices.len()
    }

    pub fn rank(&self) -> usize {
        self.u_basis.ncols()
    }

    /// Gappy coordinates `a_R = [PᵀU]⁺ Pᵀ f` of a full-length vector.
    pub fn gappy_coords(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.u_basis.nrows(), f.len())?;
        Ok(&self.pinv * f.select_rows(self.sample_indices.iter()))
    }

    /// State on the stencil, `P_sᵀ Ṽ a`.
    pub fn stencil_state(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.v_stencil * a
    }
}

/// Rows chosen by pivoted QR of `Uᵀ`, grown until at least `target_np` rows are held,
/// then augmented so every selected cell contributes all of its rows.
pub fn qr_sample(u: &DMatrix<f64>, target_np: usize, cell_map: &[usize]) -> Result<Vec<usize>> {
    let (n, r) = u.shape();
    check_dim(n, cell_map.len())?;
    if target_np < r || target_np > n {
        return Err(RomError::InvalidArgument(format!("target sample count {target_np} outside [{r}, {n}]")));
    }
    let mut order = pivoted_qr_order(&u.transpose());
    let mut rest: Vec<usize> = order.split_off(r.min(n));
    rest.sort_by(|&i, &j| u.row(j).norm_squared().total_cmp(&u.row(i).norm_squared()).then(i.cmp(&j)));
    order.extend(rest);
    let n_cells = cell_map.iter().copied().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_cells];
    for (row, &c) in cell_map.iter().enumerate() {
        members[c].push(row);
    }
    let mut chosen = vec![false; n];
    let mut count = 0;
    for (k, &p) in order.iter().enumerate() {
        if k >= r && count >= target_np {
            break;
        }
        for &row in &members[cell_map[p]] {
            if !chosen[row] {
                chosen[row] = true;
                count += 1;
            }
        }
    }
    Ok((0..n).filter(|&i| chosen[i]).collect())
}

/// Build the gappy-POD data from right-hand side snapshots and a sample set.
pub fn gappy_offline<S: SampledSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    rhs_snapshots: &DMatrix<f64>,
    r: usize,
    sample_indices: &[usize],
) -> Result<HyperData> {
    check_dim(sys.dim(), rhs_snapshots.nrows())?;
    let pod = pod_build(rhs_snapshots)?;
    hyper_from_rhs_basis(sys, basis, &pod.modes, &pod.singular_values, r, sample_indices)
}

/// Gappy-POD data from an existing right-hand side basis (leading `r` columns of `modes`).
pub fn hyper_from_rhs_basis<S: SampledSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    modes: &DMatrix<f64>,
    singular_values: &DVector<f64>,
    r: usize,
    sample_indices: &[usize],
) -> Result<HyperData> {
    check_dim(sys.dim(), basis.full_dim())?;
    check_dim(sys.dim(), modes.nrows())?;
    let rank = modes.ncols();
    if r == 0 || r > rank {
        return Err(RomError::RankDeficientSampling { requested: r, rank });
    }
    let mut samples = sample_indices.to_vec();
    samples.sort_unstable();
    samples.dedup();
    if samples.iter().any(|&s| s >= sys.dim()) {
        return Err(RomError::InvalidArgument("sample index out of range".into()));
    }
    let u_basis = modes.columns(0, r).clone_owned();
    let pt_u = u_basis.select_rows(samples.iter());
    let (pinv_m, prank) = pinv(&pt_u, 1e-12);
    if prank < r {
        return Err(RomError::RankDeficientSampling { requested: r, rank: prank });
    }
    let stencil = sys.stencil(&samples);
    let proj_precomp = basis.reduce_mat(&u_basis);
    Ok(HyperData {
        u_stencil: u_basis.select_rows(stencil.iter()),
        v_stencil: basis.rows(&stencil),
        v_sample: basis.rows(&samples),
        u_basis,
        sample_indices: samples,
        stencil_indices: stencil,
        pinv: pinv_m,
        proj_precomp,
        rhs_singular_values: singular_values.clone(),
    })
}

/// Hyper-reduced APG right-hand side `ṼᵀU (a_R + τ a_J)`; `τ = 0` gives hyper-reduced Galerkin.
pub fn hyper_apg_rhs<S: SampledSystem + ?Sized>(
    sys: &S,
    hd: &HyperData,
    a: &DVector<f64>,
    tau: f64,
    jac_mode: JacMode,
) -> Result<DVector<f64>> {
    check_dim(hd.v_stencil.ncols(), a.len())?;
    let us = hd.stencil_state(a);
    let rs = sys.rhs_rows(&hd.stencil_indices, us.as_slice(), &hd.sample_indices)?;
    let a_r = &hd.pinv * &rs;
    if tau == 0.0 {
        return Ok(&hd.proj_precomp * a_r);
    }
    // Π′(U a_R) on the stencil, using ṼᵀU for the coarse part.
    let fine = &hd.u_stencil * &a_r - &hd.v_stencil * (&hd.proj_precomp * &a_r);
    let jf = match jac_mode {
        JacMode::FiniteDiff(eps) => {
            let mut up = us.clone();
            up.axpy(eps, &fine, 1.0);
            (sys.rhs_rows(&hd.stencil_indices, up.as_slice(), &hd.sample_indices)? - &rs) / eps
        }
        JacMode::Exact => sys.jac_vec_rows(&hd.stencil_indices, us.as_slice(), fine.as_slice(), &hd.sample_indices)?,
    };
    let a_j = &hd.pinv * jf;
    Ok(&hd.proj_precomp * (a_r + a_j * tau))
}

/// Hyper-reduced Galerkin or APG dynamics as an ODE.
pub struct HyperOde<'a, S: SampledSystem + ?Sized> {
    pub sys: &'a S,
    pub data: &'a HyperData,
    pub tau: f64,
    pub jac_mode: JacMode,
}

impl<S: SampledSystem + ?Sized> OdeSystem for HyperOde<'_, S> {
    fn dim(&self) -> usize {
        self.data.proj_precomp.nrows()
    }

    fn f(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        hyper_apg_rhs(self.sys, self.data, a, self.tau, self.jac_mode)
    }

    fn jacobian(&self, a: &DVector<f64>) -> Result<DMatrix<f64>> {
        let k = a.len();
        let h = 1e-6 * crate::linalg::norm_inf(a).max(1.0);
        let base = self.f(a)?;
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut ap = a.clone();
            ap[j] += h;
            jac.set_column(j, &((self.f(&ap)? - &base) / h));
        }
        Ok(jac)
    }
}

/// One collocated LSPG step: minimize the residual at the sampled rows only.
pub fn collocated_lspg_step<S: SampledSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    sample_indices: &[usize],
    a_prev: &DVector<f64>,
    dt: f64,
    scheme: LspgScheme,
    opts: &GaussNewtonOptions,
) -> Result<GaussNewtonReport> {
    let k = basis.reduced_dim();
    check_dim(k, a_prev.len())?;
    if sample_indices.len() < k {
        return Err(RomError::RankDeficientNormalEquations { pivot: 0.0 });
    }
    let stencil = sys.stencil(sample_indices);
    let v_s = basis.rows(&stencil);
    let v_p = basis.rows(sample_indices);
    let theta = scheme.scheme().implicit_weight();
    let us_prev = &v_s * a_prev;
    let up_prev = &v_p * a_prev;
    let explicit_part = if theta < 1.0 {
        Some(sys.rhs_rows(&stencil, us_prev.as_slice(), sample_indices)? * (1.0 - theta))
    } else {
        None
    };
    let residual = |a: &DVector<f64>| -> Result<DVector<f64>> {
        let us = &v_s * a;
        let mut r = (&v_p * a - &up_prev) / dt;
        r.axpy(-theta, &sys.rhs_rows(&stencil, us.as_slice(), sample_indices)?, 1.0);
        if let Some(e) = &explicit_part {
            r -= e;
        }
        Ok(r)
    };
    gauss_newton(
        |a| {
            let us = &v_s * a;
            let r = residual(a)?;
            let mut w = &v_p / dt;
            for j in 0..k {
                let col = v_s.column(j).clone_owned();
                let jv = sys.jac_vec_rows(&stencil, us.as_slice(), col.as_slice(), sample_indices)?;
                w.column_mut(j).axpy(-theta, &jv, 1.0);
            }
            Ok((r, w))
        },
        residual,
        a_prev,
        opts,
    )
}

/// `Pᵀ Ṽ` cached for collocated runs.
pub fn sampled_basis_rows(hd: &HyperData) -> &DMatrix<f64> {
    &hd.v_sample
}

/// Right-hand side snapshots `R(u_j)` of state snapshots.
pub fn rhs_snapshots<S: FomSystem + ?Sized>(sys: &S, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(sys.dim(), states.nrows())?;
    let mut out = DMatrix::zeros(states.nrows(), states.ncols());
    for j in 0..states.ncols() {
        out.set_column(j, &sys.rhs(&states.column(j).clone_owned())?);
    }
    Ok(out)
}

/// Gappy-POD data from state snapshots: RHS POD of rank `r` and QR sampling with at least
/// `target_np` rows.
pub fn hyper_from_snapshots<S: SampledSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    states: &DMatrix<f64>,
    r: usize,
    target_np: usize,
) -> Result<HyperData> {
    let f = rhs_snapshots(sys, states)?;
    let pod = pod_build(&f)?;
    if r == 0 || r > pod.modes.ncols() {
        return Err(RomError::RankDeficientSampling { requested: r, rank: pod.modes.ncols() });
    }
    let samples = qr_sample(&pod.modes.columns(0, r).clone_owned(), target_np, &sys.cell_map())?;
    hyper_from_rhs_basis(sys, basis, &pod.modes, &pod.singular_values, r, &samples)
}

/// Integrate collocated LSPG with the implicit scheme of `opts.integrator`.
pub fn run_collocated_lspg<S: SampledSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    sample_indices: &[usize],
    a0: &DVector<f64>,
    opts: &RomRunOptions,
) -> Result<RomRun> {
    let scheme = LspgScheme::try_from(opts.integrator.scheme)?;
    march(a0, opts, None, |a, h| {
        let rep = collocated_lspg_step(sys, basis, sample_indices, a, h, scheme, &opts.gauss_newton)?;
        Ok((rep.a, StepWork { newton_iterations: rep.iterations, linear_iterations: 0 }))
    })
}

/// Integrate the hyper-reduced Galerkin (`τ = 0`) or APG model.
pub fn run_hyper<S: SampledSystem + ?Sized>(
    sys: &S,
    data: &HyperData,
    a0: &DVector<f64>,
    tau: f64,
    jac_mode: JacMode,
    opts: &RomRunOptions,
) -> Result<RomRun> {
    let ode = HyperOde { sys, data, tau, jac_mode };
    run_reduced_ode(&ode, a0, opts, (tau != 0.0).then_some(tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CountingSystem, Euler1d, Euler1dConfig, LtiSystem};
    use crate::linalg::random_orthonormal;
    use crate::rom::{apg_rhs, galerkin_rhs, lspg_step, run_rom, RomMethod};
    use crate::timeint::{IntegratorSpec, Scheme};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lti(n: usize, seed: u64) -> LtiSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) <= 1 { rng.random_range(-1.0..1.0) } else { 0.0 });
        LtiSystem::new(a - DMatrix::<f64>::identity(n, n) * 2.0).unwrap()
    }

    #[test]
    fn full_sampling_reproduces_full_apg_and_galerkin() {
        let n = 10;
        let sys = lti(n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = TrialBasis::new(random_orthonormal(n, 4, &mut rng)).unwrap();
        let f = DMatrix::from_fn(n, 25, |_, _| rng.random_range(-1.0..1.0));
        let all: Vec<usize> = (0..n).collect();
        let hd = gappy_offline(&sys, &basis, &f, n, &all).unwrap();
        let a = DVector::from_fn(4, |i, _| 0.3 * i as f64 - 0.2);
        let g = galerkin_rhs(&sys, &basis, &a).unwrap();
        assert!((hyper_apg_rhs(&sys, &hd, &a, 0.0, JacMode::Exact).unwrap() - g).amax() < 1e-8);
        for mode in [JacMode::Exact, JacMode::FiniteDiff(1e-5)] {
            let full = apg_rhs(&sys, &basis, &a, 0.2, mode).unwrap();
            let hyper = hyper_apg_rhs(&sys, &hd, &a, 0.2, mode).unwrap();
            assert!((full - hyper).amax() < 1e-8);
        }
    }

    #[test]
    fn full_sampling_run_matches_full_run() {
        let n = 12;
        let sys = lti(n, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let basis = TrialBasis::new(random_orthonormal(n, 3, &mut rng)).unwrap();
        let states = DMatrix::from_fn(n, 30, |_, _| rng.random_range(-1.0..1.0));
        let hd = hyper_from_snapshots(&sys, &basis, &states, n, n).unwrap();
        assert_eq!(hd.n_samples(), n);
        let a0 = DVector::from_vec(vec![1.0, 0.5, -0.25]);
        for scheme in [Scheme::SspRk3, Scheme::ImplicitEuler] {
            let spec = IntegratorSpec { scheme, dt: 0.01, t_final: 0.5, ..Default::default() };
            for tau in [0.0, 0.05] {
                let method = if tau == 0.0 { RomMethod::Galerkin } else { RomMethod::Apg { tau, jac_mode: JacMode::Exact } };
                let opts = RomRunOptions::new(method, spec);
                let full = run_rom(&sys, &basis, &a0, &opts).unwrap();
                let hyper = run_hyper(&sys, &hd, &a0, tau, JacMode::Exact, &opts).unwrap();
                assert!(hyper.is_stable());
                assert!((full.coords.last().unwrap() - hyper.coords.last().unwrap()).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_deficient_sampling_is_rejected() {
        let n = 8;
        let sys = lti(n, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = TrialBasis::new(random_orthonormal(n, 2, &mut rng)).unwrap();
        let f = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let all: Vec<usize> = (0..n).collect();
        assert!(matches!(gappy_offline(&sys, &basis, &f, 4, &all), Err(RomError::RankDeficientSampling { requested: 4, rank: 3 })));
        assert!(matches!(gappy_offline(&sys, &basis, &f, 3, &[0, 1]), Err(RomError::RankDeficientSampling { .. })));
    }

    #[test]
    fn qr_sampling_augments_whole_cells() {
        let n_cells = 12;
        let sys = Euler1d::new(Euler1dConfig { n_cells, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_orthonormal(3 * n_cells, 4, &mut rng);
        let cm = sys.cell_map();
        let s = qr_sample(&u, 4, &cm).unwrap();
        assert!(s.len() >= 4 && s.len() % 3 == 0);
        for &row in &s {
            let c = row % n_cells;
            assert!(s.contains(&c) && s.contains(&(c + n_cells)) && s.contains(&(c + 2 * n_cells)));
        }
        let bigger = qr_sample(&u, 20, &cm).unwrap();
        assert!(bigger.len() >= 20);
        assert!(s.iter().all(|r| bigger.contains(r)));
        assert!(qr_sample(&u, 3, &cm).is_err());
    }

    #[test]
    fn qr_sampling_picks_dominant_row() {
        let mut u = DMatrix::<f64>::zeros(5, 1);
        u[(3, 0)] = 0.9;
        u[(1, 0)] = 0.1;
        let cm: Vec<usize> = (0..5).collect();
        assert_eq!(qr_sample(&u, 1, &cm).unwrap(), vec![3]);
    }

    #[test]
    fn hyper_rhs_touches_only_sampled_rows() {
        let n_cells = 60;
        let sys = CountingSystem::new(Euler1d::new(Euler1dConfig { n_cells, ..Default::default() }).unwrap());
        let mut u = sys.inner.sod_initial_condition();
        let mut snaps = Vec::new();
        let mut rhs = Vec::new();
        for _ in 0..30 {
            u = crate::timeint::ssp_rk3_step(|v| sys.inner.rhs(v), &u, 2e-3).unwrap();
            snaps.push(u.clone());
            rhs.push(sys.inner.rhs(&u).unwrap());
        }
        let (basis, _) = crate::basis::per_variable_basis(&DMatrix::from_columns(&snaps), 3, crate::basis::Truncation::Modes(5)).unwrap();
        let f = DMatrix::from_columns(&rhs);
        let pod = pod_build(&f).unwrap();
        let samples = qr_sample(&pod.modes.columns(0, 10).clone_owned(), 15, &sys.cell_map()).unwrap();
        let hd = gappy_offline(&sys, &basis, &f, 10, &samples).unwrap();
        let a = basis.reduce(&snaps[10]);
        sys.reset();
        let out = hyper_apg_rhs(&sys, &hd, &a, 1e-3, JacMode::FiniteDiff(1e-5)).unwrap();
        assert!(out.iter().all(|x| x.is_finite()));
        assert_eq!(sys.rows_evaluated(), 2 * hd.n_samples());
        assert!(sys.distinct_rows() <= hd.n_stencil());
        assert_eq!(sys.full_calls(), 0);
        assert!(hd.n_stencil() < 3 * n_cells);
    }

    #[test]
    fn collocation_with_all_rows_is_lspg() {
        let n = 9;
        let sys = lti(n, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = TrialBasis::new(random_orthonormal(n, 3, &mut rng)).unwrap();
        let a0 = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let all: Vec<usize> = (0..n).collect();
        let opts = GaussNewtonOptions { grad_tol: 1e-13, ..Default::default() };
        for scheme in [LspgScheme::ImplicitEuler, LspgScheme::CrankNicolson] {
            let full = lspg_step(&sys, &basis, &a0, 0.1, scheme, &opts).unwrap();
            let coll = collocated_lspg_step(&sys, &basis, &all, &a0, 0.1, scheme, &opts).unwrap();
            assert!((full.a - coll.a).amax() < 1e-10);
        }
        assert!(matches!(
            collocated_lspg_step(&sys, &basis, &[0, 1], &a0, 0.1, LspgScheme::ImplicitEuler, &opts),
            Err(RomError::RankDeficientNormalEquations { .. })
        ));
        let spec = IntegratorSpec { scheme: Scheme::ImplicitEuler, dt: 0.1, t_final: 0.5, ..Default::default() };
        let mut ro = RomRunOptions::new(RomMethod::Lspg { scheme: LspgScheme::ImplicitEuler }, spec);
        ro.gauss_newton = opts;
        let full = run_rom(&sys, &basis, &a0, &ro).unwrap();
        let coll = run_collocated_lspg(&sys, &basis, &all, &a0, &ro).unwrap();
        assert_eq!(coll.steps, 5);
        assert!((full.coords.last().unwrap() - coll.coords.last().unwrap()).amax() < 1e-10);
    }

    #[test]
    fn identity_basis_pivots_select_its_rows() {
        let n = 8;
        let mut u = DMatrix::zeros(n, 3);
        for (j, &row) in [5, 1, 6].iter().enumerate() {
            u[(row, j)] = 1.0;
        }
        let cells: Vec<usize> = (0..n).collect();
        assert_eq!(qr_sample(&u, 3, &cells).unwrap(), vec![1, 5, 6]);
    }

    #[test]
    fn rank_one_signal_is_recovered_from_one_row() {
        let n = 6;
        let sys = lti(n, 3);
        let basis = TrialBasis::new(DMatrix::identity(n, 2)).unwrap();
        let u1 = DVector::from_vec(vec![0.5, -1.0, 0.0, 2.0, 0.25, 1.0]);
        let snaps = DMatrix::from_columns(&[u1.clone() * 2.0, u1.clone() * -0.5]);
        let hd = gappy_offline(&sys, &basis, &snaps, 1, &[3]).unwrap();
        let signal = &u1 * 3.7;
        let back = &hd.u_basis * hd.gappy_coords(&signal).unwrap();
        assert!((back - signal).amax() < 1e-12);
    }

    #[test]
    fn exact_span_is_reconstructed_and_gappy_projection_is_idempotent() {
        let n = 12;
        let sys = lti(n, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = TrialBasis::new(random_orthonormal(n, 3, &mut rng)).unwrap();
        let span = random_orthonormal(n, 2, &mut rng);
        let coeff = DMatrix::from_fn(2, 7, |_, _| rng.random_range(-1.0..1.0));
        let snaps = &span * coeff;
        let all: Vec<usize> = (0..n).collect();
        let hd = gappy_offline(&sys, &basis, &snaps, 2, &all).unwrap();
        for j in 0..snaps.ncols() {
            let col = snaps.column(j).clone_owned();
            assert!((&hd.u_basis * hd.gappy_coords(&col).unwrap() - &col).amax() < 1e-10);
        }
        let samples = qr_sample(&hd.u_basis, 2, &all).unwrap();
        let sparse = gappy_offline(&sys, &basis, &snaps, 2, &samples).unwrap();
        assert!((&sparse.pinv * sparse.u_basis.select_rows(sparse.sample_indices.iter()) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let once = sparse.gappy_coords(&f).unwrap();
        let twice = sparse.gappy_coords(&(&sparse.u_basis * &once)).unwrap();
        assert!((once - twice).amax() < 1e-10);
    }

    #[test]
    fn sod_rhs_projection_error_tracks_singular_value_decay() {
        let sys = Euler1d::new(Euler1dConfig { n_cells: 200, ..Default::default() }).unwrap();
        let u0 = sys.sod_initial_condition();
        let traj = crate::experiment::run_fom(&sys, &u0, 1e-3, 0.2, 1).unwrap();
        let states = crate::experiment::snapshot_matrix(&traj);
        let (basis, _) = crate::basis::per_variable_basis(&states, 3, crate::basis::Truncation::Modes(20)).unwrap();
        let r = 100;
        let hd = hyper_from_snapshots(&sys, &basis, &states, r, 3 * r).unwrap();
        let ratio = hd.rhs_singular_values[r] / hd.rhs_singular_values[0];
        for j in (0..states.ncols()).step_by(20) {
            let f = sys.rhs(&states.column(j).clone_owned()).unwrap();
            let exact = basis.reduce(&f);
            let approx = &hd.proj_precomp * hd.gappy_coords(&f).unwrap();
            assert!((&exact - approx).norm() <= 10.0 * ratio * exact.norm(), "column {j}");
        }
    }

    #[test]
    fn collocation_ignores_a_row_with_zero_residual() {
        let n = 6;
        let mut a = DMatrix::from_fn(n, n, |i, j| if i == j { -1.0 - i as f64 } else if i.abs_diff(j) == 1 { 0.3 } else { 0.0 });
        // The last row of the state and its coupling vanish, so its residual is identically zero.
        for k in 0..n {
            a[(n - 1, k)] = 0.0;
            a[(k, n - 1)] = 0.0;
        }
        let sys = LtiSystem::new(a).unwrap();
        let mut v = DMatrix::zeros(n, 2);
        v[(0, 0)] = 0.6;
        v[(1, 0)] = 0.8;
        v[(2, 1)] = 0.6;
        v[(3, 1)] = -0.8;
        let basis = TrialBasis::new(v).unwrap();
        let a0 = DVector::from_vec(vec![1.0, 0.5]);
        let opts = GaussNewtonOptions { grad_tol: 1e-13, ..Default::default() };
        let full = lspg_step(&sys, &basis, &a0, 0.1, LspgScheme::ImplicitEuler, &opts).unwrap();
        let drop: Vec<usize> = (0..n - 1).collect();
        let coll = collocated_lspg_step(&sys, &basis, &drop, &a0, 0.1, LspgScheme::ImplicitEuler, &opts).unwrap();
        assert!((full.a - coll.a).amax() < 1e-10);
    }
}
