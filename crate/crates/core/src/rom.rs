//! Galerkin, adjoint Petrov-Galerkin and least-squares Petrov-Galerkin reduced models.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::TrialBasis;
use crate::dynamics::{jac_vec_fd_with_base, FomSystem};
use crate::error::{check_dim, RomError, Result};
use crate::linalg::{at_b, norm_inf, spectral_radius, Lu};
use crate::timeint::{IntegratorSpec, OdeSystem, Scheme};

/// How the APG closure obtains `J Π′R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacMode {
    /// Forward difference with the given perturbation size.
    FiniteDiff(f64),
    /// The system's exact linearization.
    Exact,
}

impl Default for JacMode {
    fn default() -> Self {
        JacMode::FiniteDiff(1e-5)
    }
}

/// Time schemes LSPG is defined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LspgScheme {
    ImplicitEuler,
    CrankNicolson,
}

impl LspgScheme {
    pub fn scheme(self) -> Scheme {
        match self {
            LspgScheme::ImplicitEuler => Scheme::ImplicitEuler,
            LspgScheme::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

impl TryFrom<Scheme> for LspgScheme {
    type Error = RomError;
    fn try_from(s: Scheme) -> Result<Self> {
        match s {
            Scheme::ImplicitEuler => Ok(LspgScheme::ImplicitEuler),
            Scheme::CrankNicolson => Ok(LspgScheme::CrankNicolson),
            other => Err(RomError::InvalidArgument(format!("LSPG needs an implicit scheme, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomMethod {
    Galerkin,
    Apg { tau: f64, jac_mode: JacMode },
    Lspg { scheme: LspgScheme },
}

/// Galerkin right-hand side `Ṽᵀ R(Ṽ a)`.
pub fn galerkin_rhs<S: FomSystem + ?Sized>(sys: &S, basis: &TrialBasis, a: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(basis.reduced_dim(), a.len())?;
    Ok(basis.reduce(&sys.rhs(&basis.reconstruct(a))?))
}

/// APG right-hand side `Ṽᵀ [R + τ J Π′R]` evaluated at `ũ = Ṽ a`.
pub fn apg_rhs<S: FomSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    a: &DVector<f64>,
    tau: f64,
    jac_mode: JacMode,
) -> Result<DVector<f64>> {
    check_dim(basis.reduced_dim(), a.len())?;
    let u = basis.reconstruct(a);
    let r = sys.rhs(&u)?;
    let a_r = basis.reduce(&r);
    if tau == 0.0 {
        return Ok(a_r);
    }
    let fine_r = &r - basis.reconstruct(&a_r);
    let j_fine = match jac_mode {
        JacMode::Exact => sys.jac_vec(&u, &fine_r)?,
        JacMode::FiniteDiff(eps) => jac_vec_fd_with_base(sys, &u, &r, &fine_r, eps)?,
    };
    Ok(a_r + basis.reduce(&j_fine) * tau)
}

/// APG right-hand side through the explicit test basis `W = (I + τ Π′ᵀ Jᵀ) Ṽ`, returning `Wᵀ R`.
pub fn apg_test_basis_rhs<S: FomSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    a: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>> {
    check_dim(basis.reduced_dim(), a.len())?;
    let u = basis.reconstruct(a);
    let jac = sys.jac_dense(&u)?;
    let r = sys.rhs(&u)?;
    let jt_v = at_b(&jac, basis.matrix());
    let w = basis.matrix() + basis.fine_mat(&jt_v) * tau;
    Ok(w.transpose() * r)
}

/// Reduced operator `Ṽᵀ J(ũ) Ṽ`.
pub fn reduced_jacobian<S: FomSystem + ?Sized>(sys: &S, basis: &TrialBasis, a: &DVector<f64>) -> Result<DMatrix<f64>> {
    let u = basis.reconstruct(a);
    Ok(basis.reduce_mat(&sys.jac_mul(&u, basis.matrix())?))
}

/// Galerkin or APG reduced dynamics as an ODE in the reduced coordinates.
pub struct ReducedOde<'a, S: FomSystem + ?Sized> {
    pub sys: &'a S,
    pub basis: &'a TrialBasis,
    /// `None` for Galerkin, `Some((τ, mode))` for APG.
    pub closure: Option<(f64, JacMode)>,
}

impl<S: FomSystem + ?Sized> ReducedOde<'_, S> {
    /// Jacobian of the APG right-hand side from two Jacobian-block products.
    ///
    /// With `w = Π′R` and `ε` the closure step, the finite-difference closure has derivative
    /// `ṼᵀJṼ + (τ/ε) Ṽᵀ[J(ũ + εw)(Ṽ + εΠ′JṼ) − JṼ]`, which is exact for that closure.
    /// The exact closure uses the same expression with `ε` scaled to `w`.
    fn apg_jacobian(&self, a: &DVector<f64>, tau: f64, mode: JacMode) -> Result<DMatrix<f64>> {
        let basis = self.basis;
        let u = basis.reconstruct(a);
        let r = self.sys.rhs(&u)?;
        let w = basis.fine(&r);
        let jv = self.sys.jac_mul(&u, basis.matrix())?;
        let g = basis.reduce_mat(&jv);
        match mode {
            JacMode::FiniteDiff(eps) => {
                let mut shifted = u.clone();
                shifted.axpy(eps, &w, 1.0);
                let dirs = basis.matrix() + basis.fine_mat(&jv) * eps;
                let jw = self.sys.jac_mul(&shifted, &dirs)?;
                Ok(&g + basis.reduce_mat(&(jw - jv)) * (tau / eps))
            }
            JacMode::Exact => {
                let mut d = self.sys.jac_dir_mul(&u, &w, basis.matrix())?;
                d += self.sys.jac_mul(&u, &basis.fine_mat(&jv))?;
                Ok(&g + basis.reduce_mat(&d) * tau)
            }
        }
    }
}

impl<S: FomSystem + ?Sized> OdeSystem for ReducedOde<'_, S> {
    fn dim(&self) -> usize {
        self.basis.reduced_dim()
    }

    fn f(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        match self.closure {
            None => galerkin_rhs(self.sys, self.basis, a),
            Some((tau, mode)) => apg_rhs(self.sys, self.basis, a, tau, mode),
        }
    }

    fn jacobian(&self, a: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self.closure {
            None => reduced_jacobian(self.sys, self.basis, a),
            Some((0.0, _)) => reduced_jacobian(self.sys, self.basis, a),
            Some((tau, mode)) => self.apg_jacobian(a, tau, mode),
        }
    }

    fn jfnk_eps(&self) -> f64 {
        match self.closure {
            Some((tau, JacMode::FiniteDiff(_))) if tau != 0.0 => 1e-4,
            _ => 1e-5,
        }
    }
}

/// Spectral-radius based memory length.
#[derive(Debug, Clone, Copy)]
pub struct TauEstimate {
    pub tau: f64,
    pub rho: f64,
    pub used_eigen_fallback: bool,
}

/// `τ = C / ρ(Ṽᵀ J(Ṽ a) Ṽ)` with ρ from power iteration.
pub fn tau_heuristic<S: FomSystem + ?Sized>(sys: &S, basis: &TrialBasis, a: &DVector<f64>, c: f64) -> Result<TauEstimate> {
    let m = reduced_jacobian(sys, basis, a)?;
    let sr = spectral_radius(&m, 200, 1e-8);
    if !(sr.rho >= 1e-14) {
        return Err(RomError::ZeroSpectralRadius(sr.rho));
    }
    Ok(TauEstimate { tau: c / sr.rho, rho: sr.rho, used_eigen_fallback: sr.used_eigen_fallback })
}

/// Gauss-Newton controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussNewtonOptions {
    /// Absolute tolerance on `‖Wᵀ r‖∞`.
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    pub max_iter: usize,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        GaussNewtonOptions { grad_tol: 1e-10, rel_cost_tol: 1e-8, max_iter: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct GaussNewtonReport {
    pub a: DVector<f64>,
    pub iterations: usize,
    /// Cost `½‖r‖²` after each accepted iterate, starting with the initial guess.
    pub costs: Vec<f64>,
    /// `‖Wᵀ r‖∞` at the returned iterate, with `W` from the last linearization.
    pub gradient: f64,
}

/// Gauss-Newton with backtracking so the cost never increases.
/// `eval` returns the residual and its Jacobian `W`; `residual` returns the residual only.
pub fn gauss_newton<E, R>(mut eval: E, mut residual: R, a0: &DVector<f64>, opts: &GaussNewtonOptions) -> Result<GaussNewtonReport>
where
    E: FnMut(&DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>,
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut a = a0.clone();
    let (mut r, mut w) = eval(&a)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut costs = vec![cost];
    for it in 0..opts.max_iter {
        let wt = w.transpose();
        let g = &wt * &r;
        let gnorm = norm_inf(&g);
        let normal = &wt * &w;
        let lu = Lu::factor(&normal, 1e-14).map_err(|pivot| RomError::RankDeficientNormalEquations { pivot })?;
        if gnorm <= opts.grad_tol {
            return Ok(GaussNewtonReport { a, iterations: it, costs, gradient: gnorm });
        }
        let delta = lu.solve(&(-&g));
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &a + &delta * step;
            if let Ok(rt) = residual(&trial) {
                let ct = 0.5 * rt.norm_squared();
                if ct.is_finite() && ct <= cost {
                    accepted = Some((trial, ct, rt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, new_cost, r_new)) = accepted else {
            return Ok(GaussNewtonReport { a, iterations: it, costs, gradient: gnorm });
        };
        let decrease = if cost > 0.0 { (cost - new_cost) / cost } else { 0.0 };
        a = trial;
        cost = new_cost;
        costs.push(cost);
        if decrease < opts.rel_cost_tol {
            let gnorm = norm_inf(&(&wt * &r_new));
            return Ok(GaussNewtonReport { a, iterations: it + 1, costs, gradient: gnorm });
        }
        (r, w) = eval(&a)?;
    }
    Err(RomError::NoConvergence { iterations: opts.max_iter, residual: cost, best: a })
}

/// One LSPG step: minimize the fully discrete FOM residual over `Ṽ a`.
pub fn lspg_step<S: FomSystem + ?Sized>(
    sys: &S,
    basis: &TrialBasis,
    a_prev: &DVector<f64>,
    dt: f64,
    scheme: LspgScheme,
    opts: &GaussNewtonOptions,
) -> Result<GaussNewtonReport> {
    check_dim(basis.reduced_dim(), a_prev.len())?;
    let u_prev = basis.reconstruct(a_prev);
    let theta = scheme.scheme().implicit_weight();
    let explicit_part = if theta < 1.0 { Some(sys.rhs(&u_prev)? * (1.0 - theta)) } else { None };
    let residual_at = |u: &DVector<f64>, r_u: &DVector<f64>| {
        let mut res = (u - &u_prev) / dt;
        res.axpy(-theta, r_u, 1.0);
        if let Some(e) = &explicit_part {
            res -= e;
        }
        res
    };
    gauss_newton(
        |a| {
            let u = basis.reconstruct(a);
            let r = residual_at(&u, &sys.rhs(&u)?);
            let mut w = sys.jac_mul(&u, basis.matrix())?;
            let inv_dt = 1.0 / dt;
            w.zip_apply(basis.matrix(), |x, v| *x = v * inv_dt - theta * *x);
            Ok((r, w))
        },
        |a| {
            let u = basis.reconstruct(a);
            Ok(residual_at(&u, &sys.rhs(&u)?))
        },
        a_prev,
        opts,
    )
}

/// How a ROM run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Unstable { t: f64, reason: String },
}

/// Saved reduced trajectory and solver statistics.
#[derive(Debug, Clone)]
pub struct RomRun {
    pub times: Vec<f64>,
    pub coords: Vec<DVector<f64>>,
    pub status: RunStatus,
    pub steps: usize,
    pub newton_iterations: usize,
    /// GMRES iterations summed over all Newton solves.
    pub linear_iterations: usize,
    /// Seconds spent inside the time loop.
    pub wall_time: f64,
    /// τ used at the start of the run (APG only).
    pub tau: Option<f64>,
    /// Cumulative solver work at each saved time.
    pub saved_work: Vec<StepWork>,
}

impl RomRun {
    pub fn is_stable(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Options for a reduced-order run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomRunOptions {
    pub method: RomMethod,
    pub integrator: IntegratorSpec,
    pub save_every: usize,
    /// A run is flagged unstable once any `|a_i|` exceeds this.
    pub divergence_limit: f64,
    pub gauss_newton: GaussNewtonOptions,
    /// Re-evaluate `τ = C / ρ` at every step with this `C` (APG only).
    pub per_step_tau: Option<f64>,
}

impl RomRunOptions {
    pub fn new(method: RomMethod, integrator: IntegratorSpec) -> Self {
        RomRunOptions {
            method,
            integrator,
            save_every: 1,
            divergence_limit: 1e8,
            gauss_newton: GaussNewtonOptions::default(),
            per_step_tau: None,
        }
    }
}

fn check_diverged(t: f64, a: &DVector<f64>, limit: f64) -> Result<()> {
    let m = norm_inf(a);
    if !m.is_finite() || m > limit || a.iter().any(|x| x.is_nan()) {
        return Err(RomError::Diverged { t, max_abs: m });
    }
    Ok(())
}

/// Solver work reported by one reduced time step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepWork {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
}

/// Advance `a0` over the step grid of `opts.integrator` with a caller-supplied one-step map,
/// saving and checking divergence after every step. Step failures end the run as unstable.
pub fn march<F>(a0: &DVector<f64>, opts: &RomRunOptions, tau: Option<f64>, mut step_fn: F) -> Result<RomRun>
where
    F: FnMut(&DVector<f64>, f64) -> Result<(DVector<f64>, StepWork)>,
{
    let spec = &opts.integrator;
    spec.validate()?;
    let save_every = opts.save_every.max(1);
    let mut run = RomRun {
        times: vec![0.0],
        coords: vec![a0.clone()],
        status: RunStatus::Completed,
        steps: 0,
        newton_iterations: 0,
        linear_iterations: 0,
        wall_time: 0.0,
        tau,
        saved_work: vec![StepWork::default()],
    };
    let n = spec.n_steps();
    let start = Instant::now();
    let mut a = a0.clone();
    let outcome: Result<()> = (|| {
        for step in 0..n {
            let (next, work) = step_fn(&a, spec.step_size(step))?;
            run.newton_iterations += work.newton_iterations;
            run.linear_iterations += work.linear_iterations;
            a = next;
            let t = if step + 1 == n { spec.t_final } else { (step + 1) as f64 * spec.dt };
            check_diverged(t, &a, opts.divergence_limit)?;
            run.steps += 1;
            if (step + 1) % save_every == 0 || step + 1 == n {
                run.times.push(t);
                run.coords.push(a.clone());
                run.saved_work.push(StepWork { newton_iterations: run.newton_iterations, linear_iterations: run.linear_iterations });
            }
        }
        Ok(())
    })();
    run.wall_time = start.elapsed().as_secs_f64();
    if let Err(e) = outcome {
        let t = run.steps as f64 * spec.dt;
        run.status = RunStatus::Unstable { t, reason: e.to_string() };
    }
    Ok(run)
}

fn ode_step<O: OdeSystem + ?Sized>(ode: &O, spec: &IntegratorSpec, a: &DVector<f64>, h: f64) -> Result<(DVector<f64>, StepWork)> {
    let (next, stats) = crate::timeint::step(ode, spec, a, h)?;
    Ok((next, StepWork { newton_iterations: stats.newton_iterations, linear_iterations: stats.linear_iterations }))
}

/// Integrate a reduced ODE from `a0` with the integrator and saving options of `opts`
/// (the method field is ignored). Solver failures end the run as unstable.
pub fn run_reduced_ode<O: OdeSystem + ?Sized>(ode: &O, a0: &DVector<f64>, opts: &RomRunOptions, tau: Option<f64>) -> Result<RomRun> {
    check_dim(ode.dim(), a0.len())?;
    march(a0, opts, tau, |a, h| ode_step(ode, &opts.integrator, a, h))
}

/// Integrate a reduced model from `a0`. Solver failures end the run as unstable.
pub fn run_rom<S: FomSystem + ?Sized>(sys: &S, basis: &TrialBasis, a0: &DVector<f64>, opts: &RomRunOptions) -> Result<RomRun> {
    check_dim(basis.reduced_dim(), a0.len())?;
    check_dim(sys.dim(), basis.full_dim())?;
    let spec = &opts.integrator;
    match (opts.method, opts.per_step_tau) {
        (RomMethod::Lspg { scheme }, _) => {
            if spec.scheme != scheme.scheme() {
                return Err(RomError::InvalidArgument(format!(
                    "LSPG scheme {scheme:?} does not match integrator {:?}",
                    spec.scheme
                )));
            }
            march(a0, opts, None, |a, h| {
                let rep = lspg_step(sys, basis, a, h, scheme, &opts.gauss_newton)?;
                Ok((rep.a, StepWork { newton_iterations: rep.iterations, linear_iterations: 0 }))
            })
        }
        (RomMethod::Apg { tau, jac_mode }, Some(c)) => {
            let single = IntegratorSpec { t_final: spec.dt, ..*spec };
            march(a0, opts, Some(tau), |a, h| {
                let tau = tau_heuristic(sys, basis, a, c)?.tau;
                ode_step(&ReducedOde { sys, basis, closure: Some((tau, jac_mode)) }, &single, a, h)
            })
        }
        (RomMethod::Apg { tau, jac_mode }, None) => {
            run_reduced_ode(&ReducedOde { sys, basis, closure: Some((tau, jac_mode)) }, a0, opts, Some(tau))
        }
        (RomMethod::Galerkin, _) => run_reduced_ode(&ReducedOde { sys, basis, closure: None }, a0, opts, None),
    }
}
