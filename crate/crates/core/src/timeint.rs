//! Time integrators and nonlinear solvers.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RomError, Result};
use crate::linalg::{gmres, norm_inf, singular_to_err, Lu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    SspRk3,
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn is_implicit(self) -> bool {
        matches!(self, Scheme::ImplicitEuler | Scheme::CrankNicolson)
    }

    /// Weight of the new-time right-hand side in the implicit residual.
    pub fn implicit_weight(self) -> f64 {
        match self {
            Scheme::CrankNicolson => 0.5,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearSolver {
    /// Dense Jacobian and Gaussian elimination.
    Direct,
    /// Jacobian-free GMRES with at most `max_krylov` iterations per Newton step.
    JfnkGmres { max_krylov: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    /// Max-norm tolerance on the implicit residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_solver: LinearSolver,
    /// Keep the direct-solver Jacobian across Newton iterations of a step, refreshing it
    /// only when the residual fails to halve.
    pub jacobian_reuse: bool,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            scheme: Scheme::SspRk3,
            dt: 5e-4,
            t_final: 1.0,
            newton_tol: 1e-8,
            newton_max_iter: 20,
            linear_solver: LinearSolver::Direct,
            jacobian_reuse: false,
        }
    }
}

impl IntegratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(RomError::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(RomError::InvalidArgument(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        Ok(())
    }

    /// `ceil(t_final / dt)`, robust to the representation error of `dt`.
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_final / self.dt;
        (ratio - 1e-9 * ratio.max(1.0)).ceil().max(0.0) as usize
    }

    /// Size of step `n`; the final step is truncated to land on `t_final`.
    pub fn step_size(&self, n: usize) -> f64 {
        let start = n as f64 * self.dt;
        if n + 1 == self.n_steps() {
            self.t_final - start
        } else {
            self.dt
        }
    }
}

/// An ODE `dy/dt = f(y)` ready for time integration.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn f(&self, y: &DVector<f64>) -> Result<DVector<f64>>;
    /// `∂f/∂y`, used by direct Newton.
    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Perturbation size for Jacobian-free products.
    fn jfnk_eps(&self) -> f64 {
        1e-5
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub y: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub linear_iterations: usize,
}

fn newton_loop<R, S>(mut residual: R, mut solve: S, y0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonReport>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    S: FnMut(&DVector<f64>, &DVector<f64>) -> Result<(DVector<f64>, usize)>,
{
    let mut y = y0.clone();
    let mut r = residual(&y)?;
    let mut rn = norm_inf(&r);
    let mut best = (y.clone(), rn);
    let mut linear_iterations = 0;
    for it in 0..max_iter {
        if rn <= tol {
            return Ok(NewtonReport { y, iterations: it, residual: rn, linear_iterations });
        }
        let (delta, lin) = solve(&y, &r)?;
        linear_iterations += lin;
        y += delta;
        r = residual(&y)?;
        rn = norm_inf(&r);
        if !rn.is_finite() {
            break;
        }
        if rn < best.1 {
            best = (y.clone(), rn);
        }
    }
    if rn <= tol {
        return Ok(NewtonReport { y, iterations: max_iter, residual: rn, linear_iterations });
    }
    Err(RomError::NoConvergence { iterations: max_iter, residual: best.1, best: best.0 })
}

/// Newton's method with a dense Jacobian and LU with partial pivoting.
pub fn newton_direct<R, J>(residual: R, mut jacobian: J, y0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonReport>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    newton_loop(
        residual,
        |y, r| {
            let jm = jacobian(y)?;
            let lu = Lu::factor(&jm, 1e-14).map_err(singular_to_err)?;
            Ok((lu.solve(&(-r)), 0))
        },
        y0,
        tol,
        max_iter,
    )
}

/// Newton's method that refactors the Jacobian only when the residual fails to halve.
pub fn newton_direct_reuse<R, J>(residual: R, mut jacobian: J, y0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonReport>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut lu: Option<Lu> = None;
    let mut last = f64::INFINITY;
    newton_loop(
        residual,
        |y, r| {
            let rn = norm_inf(r);
            if lu.is_none() || rn > 0.5 * last {
                lu = Some(Lu::factor(&jacobian(y)?, 1e-14).map_err(singular_to_err)?);
            }
            last = rn;
            Ok((lu.as_ref().expect("factored").solve(&(-r)), 0))
        },
        y0,
        tol,
        max_iter,
    )
}

/// Jacobian-free Newton-Krylov: GMRES on finite-difference residual products.
pub fn newton_jfnk_gmres<R>(residual: R, y0: &DVector<f64>, max_krylov: usize, eps: f64, tol: f64, max_iter: usize) -> Result<NewtonReport>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    newton_loop(
        &residual,
        |y, r| {
            let out = gmres(
                |v| {
                    let vn = v.norm();
                    if vn == 0.0 {
                        return Ok(DVector::zeros(v.len()));
                    }
                    let mut yp = y.clone();
                    yp.axpy(eps / vn, v, 1.0);
                    Ok((residual(&yp)? - r) * (vn / eps))
                },
                &(-r),
                max_krylov.min(y.len()).max(1),
                1e-12,
            )?;
            Ok((out.x, out.iterations))
        },
        y0,
        tol,
        max_iter,
    )
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
}

/// Advance `y` by one step of size `h`.
pub fn step<O: OdeSystem + ?Sized>(ode: &O, spec: &IntegratorSpec, y: &DVector<f64>, h: f64) -> Result<(DVector<f64>, StepStats)> {
    match spec.scheme {
        Scheme::ExplicitEuler => {
            let mut out = y.clone();
            out.axpy(h, &ode.f(y)?, 1.0);
            Ok((out, StepStats::default()))
        }
        Scheme::SspRk3 => Ok((ssp_rk3_step(|v| ode.f(v), y, h)?, StepStats::default())),
        Scheme::ImplicitEuler | Scheme::CrankNicolson => {
            let theta = spec.scheme.implicit_weight();
            let explicit_part = if theta < 1.0 { Some(ode.f(y)? * (1.0 - theta)) } else { None };
            let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
                let mut r = (z - y) / h;
                r.axpy(-theta, &ode.f(z)?, 1.0);
                if let Some(e) = &explicit_part {
                    r -= e;
                }
                Ok(r)
            };
            let report = match spec.linear_solver {
                LinearSolver::Direct => {
                    let jac = |z: &DVector<f64>| -> Result<DMatrix<f64>> {
                        let n = z.len();
                        Ok(DMatrix::<f64>::identity(n, n) / h - ode.jacobian(z)? * theta)
                    };
                    if spec.jacobian_reuse {
                        newton_direct_reuse(residual, jac, y, spec.newton_tol, spec.newton_max_iter)?
                    } else {
                        newton_direct(residual, jac, y, spec.newton_tol, spec.newton_max_iter)?
                    }
                }
                LinearSolver::JfnkGmres { max_krylov } => {
                    newton_jfnk_gmres(residual, y, max_krylov, ode.jfnk_eps(), spec.newton_tol, spec.newton_max_iter)?
                }
            };
            Ok((
                report.y,
                StepStats { newton_iterations: report.iterations, linear_iterations: report.linear_iterations },
            ))
        }
    }
}

/// One SSP-RK3 step in Shu-Osher form.
pub fn ssp_rk3_step<F>(f: F, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut y1 = y.clone();
    y1.axpy(h, &f(y)?, 1.0);
    let mut y2 = y1.clone();
    y2.axpy(h, &f(&y1)?, 1.0);
    y2 = y * 0.75 + y2 * 0.25;
    let mut y3 = y2.clone();
    y3.axpy(h, &f(&y2)?, 1.0);
    Ok(y / 3.0 + y3 * (2.0 / 3.0))
}

/// Saved states of a time integration.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub steps: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Seconds spent inside the time loop.
    pub wall_time: f64,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// States as matrix columns.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut m = DMatrix::zeros(n, self.states.len());
        for (j, s) in self.states.iter().enumerate() {
            m.set_column(j, s);
        }
        m
    }
}

/// Integrate from `y0`, saving the initial state, every `save_every`-th step and the final state.
/// `on_step` sees each new state and may abort the run.
pub fn integrate<O, C>(ode: &O, spec: &IntegratorSpec, y0: &DVector<f64>, save_every: usize, mut on_step: C) -> Result<Trajectory>
where
    O: OdeSystem + ?Sized,
    C: FnMut(f64, &DVector<f64>) -> Result<()>,
{
    spec.validate()?;
    crate::error::check_dim(ode.dim(), y0.len())?;
    let save_every = save_every.max(1);
    let n_steps = spec.n_steps();
    let mut traj = Trajectory { times: vec![0.0], states: vec![y0.clone()], ..Default::default() };
    let start = Instant::now();
    let mut y = y0.clone();
    for n in 0..n_steps {
        let h = spec.step_size(n);
        let (next, stats) = step(ode, spec, &y, h)?;
        y = next;
        traj.newton_iterations += stats.newton_iterations;
        traj.linear_iterations += stats.linear_iterations;
        let t = if n + 1 == n_steps { spec.t_final } else { (n + 1) as f64 * spec.dt };
        on_step(t, &y)?;
        if (n + 1) % save_every == 0 || n + 1 == n_steps {
            traj.times.push(t);
            traj.states.push(y.clone());
        }
    }
    traj.steps = n_steps;
    traj.wall_time = start.elapsed().as_secs_f64();
    Ok(traj)
}
