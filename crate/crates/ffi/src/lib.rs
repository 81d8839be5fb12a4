//! C interface to the reduced-order models.
//!
//! Objects cross the boundary as opaque handles owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`ApgStatus`]; on failure the message is
//! available from [`apg_last_error`] until the next failing call on the same thread.
//! Matrices are dense column-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use apgrom::basis::{per_variable_basis, TrialBasis, Truncation};
use apgrom::dynamics::{Euler1d, Euler1dConfig, FomOde, FomSystem, LtiSystem};
use apgrom::rom::{run_rom, tau_heuristic, JacMode, LspgScheme, RomMethod, RomRunOptions, RunStatus};
use apgrom::timeint::{integrate, IntegratorSpec, Scheme};
use apgrom::RomError;
use nalgebra::{DMatrix, DVector};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SolverFailure = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApgMethod {
    Galerkin = 0,
    Apg = 1,
    Lspg = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApgScheme {
    ExplicitEuler = 0,
    SspRk3 = 1,
    ImplicitEuler = 2,
    CrankNicolson = 3,
}

impl From<ApgScheme> for Scheme {
    fn from(s: ApgScheme) -> Scheme {
        match s {
            ApgScheme::ExplicitEuler => Scheme::ExplicitEuler,
            ApgScheme::SspRk3 => Scheme::SspRk3,
            ApgScheme::ImplicitEuler => Scheme::ImplicitEuler,
            ApgScheme::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

enum Model {
    Sod(Euler1d),
    Lti(LtiSystem),
}

/// A full-order model.
pub struct ApgSystem {
    model: Model,
}

impl ApgSystem {
    fn sys(&self) -> &dyn FomSystem {
        match &self.model {
            Model::Sod(s) => s,
            Model::Lti(s) => s,
        }
    }
}

/// An orthonormal trial basis.
pub struct ApgBasis {
    basis: TrialBasis,
}

/// Saved states of a full or reduced run.
pub struct ApgTrajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    stable: bool,
    steps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ApgStatus, msg: impl Into<String>) -> ApgStatus {
    set_error(msg.into());
    status
}

fn from_rom(e: RomError) -> ApgStatus {
    let status = match e {
        RomError::DimensionMismatch { .. } => ApgStatus::DimensionMismatch,
        RomError::InvalidArgument(_) | RomError::InvalidCriterion(_) | RomError::NonOrthonormalBlock { .. } => ApgStatus::InvalidArgument,
        _ => ApgStatus::SolverFailure,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into [`ApgStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), ApgStatus>) -> ApgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ApgStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_default();
            fail(ApgStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), ApgStatus> {
    if p.is_null() {
        Err(fail(ApgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], ApgStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable doubles.
unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], ApgStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(expected: usize, got: usize) -> Result<(), ApgStatus> {
    if expected != got {
        return Err(fail(ApgStatus::DimensionMismatch, format!("expected length {expected}, got {got}")));
    }
    Ok(())
}

/// # Safety
/// `out` must be null or valid for one pointer write.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), ApgStatus> {
    nonnull(out, "out")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failing call on this thread, or null if none failed.
/// The string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn apg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Shock tube on `[0, 1]` with `n_cells` cells, `γ = 1.4` and no entropy fix.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_system_sod_new(n_cells: usize, out: *mut *mut ApgSystem) -> ApgStatus {
    guard(|| {
        let sys = Euler1d::new(Euler1dConfig { n_cells, ..Default::default() }).map_err(from_rom)?;
        emit(out, ApgSystem { model: Model::Sod(sys) })
    })
}

/// Linear system `u' = A u` with `A` given as an `n × n` column-major array.
///
/// # Safety
/// `a` must point to `n * n` readable doubles and `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_system_lti_new(n: usize, a: *const f64, out: *mut *mut ApgSystem) -> ApgStatus {
    guard(|| {
        let data = slice(a, n * n, "a")?;
        let sys = LtiSystem::new(DMatrix::from_column_slice(n, n, data)).map_err(from_rom)?;
        emit(out, ApgSystem { model: Model::Lti(sys) })
    })
}

/// # Safety
/// `sys` must be null or a handle from `apg_system_*_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apg_system_free(sys: *mut ApgSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live system handle.
#[no_mangle]
pub unsafe extern "C" fn apg_system_dim(sys: *const ApgSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.sys().dim())
}

/// The shock-tube initial state; fails for other systems.
///
/// # Safety
/// `sys` must be a live system handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn apg_system_initial_condition(sys: *const ApgSystem, out: *mut f64, len: usize) -> ApgStatus {
    guard(|| {
        nonnull(sys, "sys")?;
        let Model::Sod(s) = &(*sys).model else {
            return Err(fail(ApgStatus::InvalidArgument, "only the shock tube has a built-in initial condition"));
        };
        let u0 = s.sod_initial_condition();
        check_len(u0.len(), len)?;
        slice_mut(out, len, "out")?.copy_from_slice(u0.as_slice());
        Ok(())
    })
}

/// Right-hand side `R(u)`.
///
/// # Safety
/// `sys` must be a live system handle; `u` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn apg_system_rhs(sys: *const ApgSystem, u: *const f64, out: *mut f64, len: usize) -> ApgStatus {
    guard(|| {
        nonnull(sys, "sys")?;
        let s = (*sys).sys();
        check_len(s.dim(), len)?;
        let r = s.rhs(&DVector::from_column_slice(slice(u, len, "u")?)).map_err(from_rom)?;
        slice_mut(out, len, "out")?.copy_from_slice(r.as_slice());
        Ok(())
    })
}

/// Integrate the full-order model from `u0`, saving the initial state, every
/// `save_every`-th step and the final state.
///
/// # Safety
/// `sys` must be a live system handle, `u0` must point to `len` doubles and `out` must be
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_fom_run(
    sys: *const ApgSystem,
    u0: *const f64,
    len: usize,
    scheme: ApgScheme,
    dt: f64,
    t_final: f64,
    save_every: usize,
    out: *mut *mut ApgTrajectory,
) -> ApgStatus {
    guard(|| {
        nonnull(sys, "sys")?;
        let s = (*sys).sys();
        check_len(s.dim(), len)?;
        let y0 = DVector::from_column_slice(slice(u0, len, "u0")?);
        let spec = IntegratorSpec { scheme: scheme.into(), dt, t_final, ..Default::default() };
        let traj = integrate(&FomOde(s), &spec, &y0, save_every, |_, _| Ok(())).map_err(from_rom)?;
        emit(out, ApgTrajectory { times: traj.times, states: traj.states, stable: true, steps: traj.steps })
    })
}

/// Basis from an `n × k` column-major array with orthonormal columns.
///
/// # Safety
/// `v` must point to `n * k` readable doubles and `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_basis_new(n: usize, k: usize, v: *const f64, out: *mut *mut ApgBasis) -> ApgStatus {
    guard(|| {
        let data = slice(v, n * k, "v")?;
        let basis = TrialBasis::new(DMatrix::from_column_slice(n, k, data)).map_err(from_rom)?;
        emit(out, ApgBasis { basis })
    })
}

/// Block-diagonal POD basis from an `n × m` snapshot array split into `n_vars` variables,
/// keeping `k_per_var` modes of each.
///
/// # Safety
/// `snapshots` must point to `n * m` readable doubles and `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_basis_from_snapshots(
    n: usize,
    m: usize,
    snapshots: *const f64,
    n_vars: usize,
    k_per_var: usize,
    out: *mut *mut ApgBasis,
) -> ApgStatus {
    guard(|| {
        let data = slice(snapshots, n * m, "snapshots")?;
        let (basis, _) = per_variable_basis(&DMatrix::from_column_slice(n, m, data), n_vars, Truncation::Modes(k_per_var)).map_err(from_rom)?;
        emit(out, ApgBasis { basis })
    })
}

/// # Safety
/// `basis` must be null or a handle from `apg_basis_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apg_basis_free(basis: *mut ApgBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Reduced dimension `K`, or 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live basis handle.
#[no_mangle]
pub unsafe extern "C" fn apg_basis_reduced_dim(basis: *const ApgBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.basis.reduced_dim())
}

/// Coordinates `Ṽᵀ u`.
///
/// # Safety
/// `basis` must be a live basis handle, `u` must point to `n` doubles and `a` to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn apg_basis_reduce(basis: *const ApgBasis, u: *const f64, n: usize, a: *mut f64, k: usize) -> ApgStatus {
    guard(|| {
        nonnull(basis, "basis")?;
        let b = &(*basis).basis;
        check_len(b.full_dim(), n)?;
        check_len(b.reduced_dim(), k)?;
        let r = b.reduce(&DVector::from_column_slice(slice(u, n, "u")?));
        slice_mut(a, k, "a")?.copy_from_slice(r.as_slice());
        Ok(())
    })
}

/// `τ = c / ρ` with `ρ` the spectral radius of the reduced Jacobian at `a`.
///
/// # Safety
/// Handles must be live, `a` must point to `k` doubles, `tau` and `rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apg_tau_heuristic(
    sys: *const ApgSystem,
    basis: *const ApgBasis,
    a: *const f64,
    k: usize,
    c: f64,
    tau: *mut f64,
    rho: *mut f64,
) -> ApgStatus {
    guard(|| {
        nonnull(sys, "sys")?;
        nonnull(basis, "basis")?;
        nonnull(tau, "tau")?;
        nonnull(rho, "rho")?;
        let b = &(*basis).basis;
        check_len(b.reduced_dim(), k)?;
        let est = tau_heuristic((*sys).sys(), b, &DVector::from_column_slice(slice(a, k, "a")?), c).map_err(from_rom)?;
        *tau = est.tau;
        *rho = est.rho;
        Ok(())
    })
}

/// Integrate a reduced model from `a0`. `tau` is read for APG only; LSPG needs an implicit
/// scheme. A run that blows up still returns a trajectory, flagged unstable.
///
/// # Safety
/// Handles must be live, `a0` must point to `k` doubles and `out` must be valid for one
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn apg_rom_run(
    sys: *const ApgSystem,
    basis: *const ApgBasis,
    a0: *const f64,
    k: usize,
    method: ApgMethod,
    scheme: ApgScheme,
    dt: f64,
    t_final: f64,
    tau: f64,
    save_every: usize,
    out: *mut *mut ApgTrajectory,
) -> ApgStatus {
    guard(|| {
        nonnull(sys, "sys")?;
        nonnull(basis, "basis")?;
        let b = &(*basis).basis;
        check_len(b.reduced_dim(), k)?;
        let scheme = Scheme::from(scheme);
        let method = match method {
            ApgMethod::Galerkin => RomMethod::Galerkin,
            ApgMethod::Apg => RomMethod::Apg { tau, jac_mode: JacMode::default() },
            ApgMethod::Lspg => RomMethod::Lspg { scheme: LspgScheme::try_from(scheme).map_err(from_rom)? },
        };
        let mut opts = RomRunOptions::new(method, IntegratorSpec { scheme, dt, t_final, ..Default::default() });
        opts.save_every = save_every;
        let run = run_rom((*sys).sys(), b, &DVector::from_column_slice(slice(a0, k, "a0")?), &opts).map_err(from_rom)?;
        if let RunStatus::Unstable { t, reason } = &run.status {
            set_error(format!("unstable at t = {t}: {reason}"));
        }
        let stable = run.is_stable();
        emit(out, ApgTrajectory { times: run.times, states: run.coords, stable, steps: run.steps })
    })
}

/// # Safety
/// `traj` must be null or a handle from `apg_fom_run`/`apg_rom_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_free(traj: *mut ApgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of saved states, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_len(traj: *const ApgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.times.len())
}

/// Length of each saved state, or 0 for a null or empty handle.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_state_dim(traj: *const ApgTrajectory) -> usize {
    traj.as_ref().and_then(|t| t.states.first()).map_or(0, |s| s.len())
}

/// Whether the run reached its final time, false for a null handle.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_is_stable(traj: *const ApgTrajectory) -> bool {
    traj.as_ref().is_some_and(|t| t.stable)
}

/// Time steps taken, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_steps(traj: *const ApgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.steps)
}

/// Time and state of saved sample `index`.
///
/// # Safety
/// `traj` must be a live trajectory handle, `t` writable and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn apg_trajectory_get(traj: *const ApgTrajectory, index: usize, t: *mut f64, out: *mut f64, len: usize) -> ApgStatus {
    guard(|| {
        nonnull(traj, "traj")?;
        nonnull(t, "t")?;
        let tr = &*traj;
        let Some(state) = tr.states.get(index) else {
            return Err(fail(ApgStatus::InvalidArgument, format!("index {index} beyond {} saved states", tr.states.len())));
        };
        check_len(state.len(), len)?;
        *t = tr.times[index];
        slice_mut(out, len, "out")?.copy_from_slice(state.as_slice());
        Ok(())
    })
}
