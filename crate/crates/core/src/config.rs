//! Run configuration: one JSON document drives every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::cost::CostModel;
use crate::basis::Truncation;
use crate::dynamics::Euler1dConfig;
use crate::rom::{GaussNewtonOptions, JacMode, LspgScheme, RomMethod, RomRunOptions};
use crate::timeint::{IntegratorSpec, LinearSolver, Scheme};

/// A configuration error with the path of the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub fom: IntegratorSpec,
    #[serde(default)]
    pub pod: PodConfig,
    #[serde(default)]
    pub rom: RomConfig,
    #[serde(default)]
    pub hyper: Option<HyperConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub cost: CostConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    /// Shock tube with the classic left/right states.
    Sod(Euler1dConfig),
    /// `u' = A u` with the second-difference operator on `n` interior points.
    LtiDiffusion(LtiDiffusionConfig),
    /// `u' = A u` with `A` read from a matrix file.
    LtiFile(LtiFileConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LtiDiffusionConfig {
    pub n: usize,
    pub length: f64,
}

impl Default for LtiDiffusionConfig {
    fn default() -> Self {
        LtiDiffusionConfig { n: 32, length: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtiFileConfig {
    pub path: PathBuf,
    /// Initial condition; a seeded random unit vector when absent.
    #[serde(default)]
    pub u0_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PodLayout {
    /// One block per conserved variable.
    PerVariable,
    /// A single POD of the whole state.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruncationConfig {
    /// Total reduced dimension, split evenly over the blocks.
    Modes(usize),
    /// Energy fraction kept in each block.
    Energy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PodConfig {
    pub layout: PodLayout,
    pub truncation: TruncationConfig,
}

impl Default for PodConfig {
    fn default() -> Self {
        PodConfig { layout: PodLayout::PerVariable, truncation: TruncationConfig::Modes(150) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Galerkin,
    Apg,
    Lspg,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Galerkin => "galerkin",
            MethodKind::Apg => "apg",
            MethodKind::Lspg => "lspg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RomConfig {
    pub method: MethodKind,
    pub scheme: Scheme,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_solver: LinearSolver,
    pub jacobian_reuse: bool,
    /// Fixed APG memory length; `None` selects `tau_c / ρ` at the initial state.
    pub tau: Option<f64>,
    pub tau_c: f64,
    /// Re-evaluate `τ = tau_c / ρ` at every step.
    pub per_step_tau: bool,
    pub jac_mode: JacMode,
    pub gauss_newton: GaussNewtonOptions,
    pub divergence_limit: f64,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            method: MethodKind::Apg,
            scheme: Scheme::SspRk3,
            dt: 5e-4,
            newton_tol: 1e-8,
            newton_max_iter: 20,
            linear_solver: LinearSolver::Direct,
            jacobian_reuse: true,
            tau: None,
            tau_c: 0.2,
            per_step_tau: false,
            jac_mode: JacMode::default(),
            gauss_newton: GaussNewtonOptions { grad_tol: 1e-8, ..Default::default() },
            divergence_limit: 1e8,
        }
    }
}

impl RomConfig {
    /// Solver options for `method` with `scheme` and `dt`, integrating to `t_final`.
    /// `tau` is only read for APG.
    pub fn run_options(&self, method: MethodKind, scheme: Scheme, dt: f64, t_final: f64, tau: f64) -> std::result::Result<RomRunOptions, String> {
        let method = match method {
            MethodKind::Galerkin => RomMethod::Galerkin,
            MethodKind::Apg => RomMethod::Apg { tau, jac_mode: self.jac_mode },
            MethodKind::Lspg => RomMethod::Lspg { scheme: LspgScheme::try_from(scheme).map_err(|e| e.to_string())? },
        };
        let integrator = IntegratorSpec {
            scheme,
            dt,
            t_final,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear_solver: self.linear_solver,
            jacobian_reuse: self.jacobian_reuse,
        };
        let mut opts = RomRunOptions::new(method, integrator);
        opts.divergence_limit = self.divergence_limit;
        opts.gauss_newton = self.gauss_newton;
        opts.per_step_tau = (self.per_step_tau && matches!(method, RomMethod::Apg { .. })).then_some(self.tau_c);
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    /// Rank of the right-hand side basis.
    pub r: usize,
    /// Minimum number of sampled rows.
    pub target_np: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// FOM steps between saved snapshots.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), snapshot_every: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: MethodKind,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisfitGrid {
    /// `τ = c / ρ` for `c` on a logarithmic grid.
    pub c_min: f64,
    pub c_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    /// `rom.tau_c / ρ` at the initial state.
    Heuristic,
}

/// One APG memory-length choice of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauChoice {
    Value(f64),
    Rule(TauRule),
    Misfit { misfit: MisfitGrid },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Total reduced dimensions.
    pub k: Vec<usize>,
    pub dt: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    /// Applied to APG only; other methods run once per `(k, dt)`.
    #[serde(default = "default_sweep_tau")]
    pub tau: Vec<TauChoice>,
}

fn default_sweep_tau() -> Vec<TauChoice> {
    vec![TauChoice::Rule(TauRule::Heuristic)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyBasis {
    /// Seeded random orthonormal columns.
    Random,
    /// Leading eigenvectors of `A`.
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub k: usize,
    pub t_final: f64,
    pub grid_points: usize,
    pub basis: VerifyBasis,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { k: 4, t_final: 0.1, grid_points: 10, basis: VerifyBasis::Random }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub n: u64,
    pub omega: u64,
    pub eta: u64,
    pub k_max: u64,
    pub k_step: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { n: 1000, omega: 50, eta: 10, k_max: 250, k_step: 10 }
    }
}

impl CostConfig {
    pub fn model(&self, k: u64) -> CostModel {
        self.model_for(self.n, k)
    }

    /// Same `ω` and `η` with a different full-order size.
    pub fn model_for(&self, n: u64, k: u64) -> CostModel {
        CostModel { n, k, omega: self.omega, eta: self.eta }
    }
}

impl RunConfig {
    /// Parse and validate; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> CfgResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path.is_empty() || path == "." { "config".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CfgResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Conserved variables stacked in the state.
    pub fn state_vars(&self) -> usize {
        match self.problem {
            ProblemConfig::Sod(_) => 3,
            _ => 1,
        }
    }

    /// POD blocks: one per conserved variable, or one for a global basis.
    pub fn pod_blocks(&self) -> usize {
        match (&self.problem, self.pod.layout) {
            (ProblemConfig::Sod(_), PodLayout::PerVariable) => 3,
            _ => 1,
        }
    }

    pub fn truncation(&self) -> Truncation {
        match self.pod.truncation {
            TruncationConfig::Modes(k) => Truncation::Modes(k / self.pod_blocks()),
            TruncationConfig::Energy(e) => Truncation::Energy(e),
        }
    }

    /// Check every field before any work starts.
    pub fn validate(&self) -> CfgResult<()> {
        match &self.problem {
            ProblemConfig::Sod(c) => {
                positive("problem.n_cells", c.n_cells as f64)?;
                if !(c.x_max > c.x_min) {
                    return Err(ConfigError::new("problem.x_max", "must exceed x_min"));
                }
                if !(c.gamma > 1.0) {
                    return Err(ConfigError::new("problem.gamma", "must exceed 1"));
                }
                positive("problem.entropy_fix_delta", c.entropy_fix_delta)?;
            }
            ProblemConfig::LtiDiffusion(c) => {
                if c.n < 2 {
                    return Err(ConfigError::new("problem.n", "must be at least 2"));
                }
                positive("problem.length", c.length)?;
            }
            ProblemConfig::LtiFile(_) => {}
        }
        positive("fom.dt", self.fom.dt)?;
        non_negative("fom.t_final", self.fom.t_final)?;
        positive("fom.newton_tol", self.fom.newton_tol)?;
        positive("outputs.snapshot_every", self.outputs.snapshot_every as f64)?;
        match self.pod.truncation {
            TruncationConfig::Modes(k) => {
                positive("pod.truncation.modes", k as f64)?;
                if k % self.pod_blocks() != 0 {
                    return Err(ConfigError::new("pod.truncation.modes", format!("must be a multiple of {}", self.pod_blocks())));
                }
            }
            TruncationConfig::Energy(e) => {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(ConfigError::new("pod.truncation.energy", "must lie in (0, 1]"));
                }
            }
        }
        let rom = &self.rom;
        positive("rom.dt", rom.dt)?;
        positive("rom.newton_tol", rom.newton_tol)?;
        positive("rom.divergence_limit", rom.divergence_limit)?;
        positive("rom.tau_c", rom.tau_c)?;
        if let Some(t) = rom.tau {
            non_negative("rom.tau", t)?;
        }
        if let JacMode::FiniteDiff(eps) = rom.jac_mode {
            positive("rom.jac_mode.finite_diff", eps)?;
        }
        if rom.method == MethodKind::Lspg && !rom.scheme.is_implicit() {
            return Err(ConfigError::new("rom.scheme", "LSPG needs implicit_euler or crank_nicolson"));
        }
        self.check_step_ratio("rom.dt", rom.dt)?;
        if let Some(h) = &self.hyper {
            positive("hyper.r", h.r as f64)?;
            if h.target_np < h.r {
                return Err(ConfigError::new("hyper.target_np", "must be at least r"));
            }
        }
        if let Some(s) = &self.sweep {
            for (i, &k) in s.k.iter().enumerate() {
                positive(&format!("sweep.k[{i}]"), k as f64)?;
                if k % self.pod_blocks() != 0 {
                    return Err(ConfigError::new(format!("sweep.k[{i}]"), format!("must be a multiple of {}", self.pod_blocks())));
                }
            }
            for (i, &dt) in s.dt.iter().enumerate() {
                positive(&format!("sweep.dt[{i}]"), dt)?;
                self.check_step_ratio(&format!("sweep.dt[{i}]"), dt)?;
            }
            for (i, m) in s.methods.iter().enumerate() {
                if m.method == MethodKind::Lspg && !m.scheme.is_implicit() {
                    return Err(ConfigError::new(format!("sweep.methods[{i}].scheme"), "LSPG needs implicit_euler or crank_nicolson"));
                }
            }
            for (i, t) in s.tau.iter().enumerate() {
                let p = format!("sweep.tau[{i}]");
                match *t {
                    TauChoice::Value(v) => non_negative(&p, v)?,
                    TauChoice::Rule(_) => {}
                    TauChoice::Misfit { misfit } => {
                        positive(&format!("{p}.misfit.c_min"), misfit.c_min)?;
                        if !(misfit.c_max >= misfit.c_min) {
                            return Err(ConfigError::new(format!("{p}.misfit.c_max"), "must be at least c_min"));
                        }
                        positive(&format!("{p}.misfit.points"), misfit.points as f64)?;
                    }
                }
            }
        }
        positive("verify.k", self.verify.k as f64)?;
        positive("verify.t_final", self.verify.t_final)?;
        positive("verify.grid_points", self.verify.grid_points as f64)?;
        positive("cost.n", self.cost.n as f64)?;
        positive("cost.k_step", self.cost.k_step as f64)?;
        Ok(())
    }

    /// Interval between saved FOM snapshots.
    pub fn snapshot_interval(&self) -> f64 {
        self.fom.dt * self.outputs.snapshot_every as f64
    }

    /// ROM steps between saved states so that they land on the FOM snapshot times.
    pub fn rom_save_every(&self, dt: f64) -> usize {
        (self.snapshot_interval() / dt).round().max(1.0) as usize
    }

    fn check_step_ratio(&self, path: &str, dt: f64) -> CfgResult<()> {
        let ratio = self.snapshot_interval() / dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(ConfigError::new(path, format!("must divide the snapshot interval {}", self.snapshot_interval())));
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> CfgResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> CfgResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be non-negative, got {v}")))
    }
}
