//! Shock-tube study: one FOM run shared by every reduced model built from it.

use nalgebra::{DMatrix, DVector};

use crate::analysis::error::{error_norm, ErrorHistory, ProjectedReference};
use crate::basis::{per_variable_basis, TrialBasis, Truncation};
use crate::dynamics::{Euler1d, Euler1dConfig, FomOde};
use crate::error::{RomError, Result};
use crate::rom::{run_rom, RomMethod, RomRun, RomRunOptions};
use crate::timeint::{integrate, IntegratorSpec, Scheme, Trajectory};

/// Run the FOM with SSP-RK3, saving the initial state, every `save_every`-th step and the final state.
pub fn run_fom(sys: &Euler1d, u0: &DVector<f64>, dt: f64, t_final: f64, save_every: usize) -> Result<Trajectory> {
    let spec = IntegratorSpec { scheme: Scheme::SspRk3, dt, t_final, ..Default::default() };
    integrate(&FomOde(sys), &spec, u0, save_every, |_, _| Ok(()))
}

/// Snapshot matrix: every saved state after the initial one, or the initial state alone
/// when no step was taken.
pub fn snapshot_matrix(traj: &Trajectory) -> DMatrix<f64> {
    let skip = usize::from(traj.states.len() > 1);
    DMatrix::from_columns(&traj.states[skip..])
}

/// FOM trajectory plus everything needed to build and score ROMs on it.
pub struct SodStudy {
    pub sys: Euler1d,
    pub u0: DVector<f64>,
    pub fom: Trajectory,
    pub dt: f64,
    pub save_every: usize,
}

impl SodStudy {
    pub fn new(cfg: Euler1dConfig, dt: f64, t_final: f64, save_every: usize) -> Result<Self> {
        let sys = Euler1d::new(cfg)?;
        let u0 = sys.sod_initial_condition();
        let fom = run_fom(&sys, &u0, dt, t_final, save_every)?;
        Ok(SodStudy { sys, u0, fom, dt, save_every })
    }

    /// 1000 cells, Δt = 5e-4 on [0, 1], every second step saved.
    pub fn standard() -> Result<Self> {
        Self::new(Euler1dConfig::default(), 5e-4, 1.0, 2)
    }

    pub fn t_final(&self) -> f64 {
        *self.fom.times.last().expect("trajectory is never empty")
    }

    /// Interval between saved FOM states.
    pub fn save_interval(&self) -> f64 {
        self.dt * self.save_every as f64
    }

    pub fn snapshots(&self) -> DMatrix<f64> {
        snapshot_matrix(&self.fom)
    }

    /// Per-variable POD basis with `k_per_var` modes for each of ρ, ρu, ρE.
    pub fn basis(&self, k_per_var: usize) -> Result<TrialBasis> {
        Ok(per_variable_basis(&self.snapshots(), 3, Truncation::Modes(k_per_var))?.0)
    }

    pub fn reference(&self, basis: &TrialBasis) -> Result<ProjectedReference> {
        ProjectedReference::new(basis, &self.fom.times, &self.fom.states)
    }

    /// Default solver settings for a ROM with time step `dt`.
    pub fn rom_options(&self, method: RomMethod, scheme: Scheme, dt: f64) -> Result<RomRunOptions> {
        let ratio = self.save_interval() / dt;
        let save_every = ratio.round();
        if save_every < 1.0 || (ratio - save_every).abs() > 1e-9 * ratio {
            return Err(RomError::InvalidArgument(format!(
                "ROM step {dt} does not divide the snapshot interval {}",
                self.save_interval()
            )));
        }
        let integrator = IntegratorSpec { scheme, dt, t_final: self.t_final(), newton_tol: 1e-8, newton_max_iter: 20, jacobian_reuse: true, ..Default::default() };
        let mut opts = RomRunOptions::new(method, integrator);
        opts.save_every = save_every as usize;
        opts.gauss_newton.grad_tol = 1e-8;
        Ok(opts)
    }

    /// Run a ROM from the projected initial condition.
    pub fn run(&self, basis: &TrialBasis, opts: &RomRunOptions) -> Result<RomRun> {
        let a0 = basis.reduce(&self.u0);
        run_rom(&self.sys, basis, &a0, opts)
    }

    /// Run and score a ROM; `None` for the error when the run was unstable.
    pub fn run_scored(&self, basis: &TrialBasis, reference: &ProjectedReference, opts: &RomRunOptions) -> Result<(RomRun, Option<ErrorHistory>)> {
        let run = self.run(basis, opts)?;
        let err = if run.is_stable() { Some(error_norm(&run, reference)?) } else { None };
        Ok((run, err))
    }
}
