//! Batch driver: every subcommand reads one config and works on artifacts in one output directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::cost::{flop_estimate, relative_cost, Algorithm};
use crate::analysis::error::{error_norm, ProjectedReference};
use crate::analysis::misfit::{log_grid, misfit_tau};
use crate::analysis::theory::verify_all;
use crate::basis::{basis_from_pods, per_variable_basis, per_variable_pods, Truncation, TrialBasis};
use crate::config::{MethodKind, MethodSpec, ProblemConfig, RunConfig, TauChoice, VerifyBasis};
use crate::dynamics::{make_diffusion_lti, Euler1d, FomOde, FomSystem, LtiSystem};
use crate::error::RomError;
use crate::experiment::snapshot_matrix;
use crate::hyper::{hyper_from_snapshots, run_collocated_lspg, run_hyper};
use crate::io::{read_basis, read_hyper, read_matrix, read_snapshots, write_basis, write_hyper, write_matrix, write_snapshots, SnapshotMeta};
use crate::linalg::{random_orthonormal, sym_eigen_desc};
use crate::rom::{run_rom, tau_heuristic, RomMethod, RomRun, RunStatus};
use crate::timeint::{integrate, LinearSolver, Scheme};

pub const SNAPSHOTS: &str = "snapshots.bin";
pub const INITIAL_CONDITION: &str = "initial_condition.bin";
pub const BASIS: &str = "basis.bin";
pub const HYPER: &str = "hyper.bin";

#[derive(Debug, Parser)]
#[command(name = "apgrom", version, about = "Galerkin, APG and LSPG reduced-order models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full-order model and save snapshots.
    FomRun(Common),
    /// Build the POD basis (and hyper-reduction data) from saved snapshots.
    PodBuild(Common),
    /// Run one reduced model against the saved basis.
    RomRun(Common),
    /// Run a grid of reduced models over K, Δt, method and τ.
    Sweep(Common),
    /// Check the LTI error and eigenvalue results numerically.
    Verify(Common),
    /// Tabulate per-step operation counts.
    Cost(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("missing artifact {}: {reason}", path.display())]
    MissingArtifact { path: PathBuf, reason: String },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::MissingArtifact { .. } => 4,
            CliError::Verification(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn solver(e: RomError) -> CliError {
    CliError::Solver(e.to_string())
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn artifact<T>(path: &Path, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::MissingArtifact { path: path.to_path_buf(), reason: e.to_string() })
}

/// Parse arguments, run, report and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loaded config with command-line overrides applied.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub workers: usize,
}

impl Context {
    pub fn new(common: &Common) -> CliResult<Self> {
        let mut cfg = RunConfig::load(&common.config).map_err(config)?;
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        let out = common.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
        if common.workers == 0 {
            return Err(CliError::Config("--workers: must be positive".into()));
        }
        Ok(Context { cfg, out, workers: common.workers })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))
    }

    fn write(&self, name: &str, text: &str) -> CliResult<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let (common, f): (&Common, fn(&Context) -> CliResult<()>) = match &cli.command {
        Command::FomRun(c) => (c, cmd_fom_run),
        Command::PodBuild(c) => (c, cmd_pod_build),
        Command::RomRun(c) => (c, cmd_rom_run),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Verify(c) => (c, cmd_verify),
        Command::Cost(c) => (c, cmd_cost),
    };
    let ctx = Context::new(common)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.workers).build().map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    pool.install(|| f(&ctx))
}

/// The full-order model selected by the config.
pub enum Model {
    Sod(Euler1d),
    Lti(LtiSystem),
}

macro_rules! with_model {
    ($model:expr, $sys:ident => $body:expr) => {
        match $model {
            Model::Sod($sys) => $body,
            Model::Lti($sys) => $body,
        }
    };
}

/// Build the model and its initial condition.
pub fn build_problem(cfg: &RunConfig) -> CliResult<(Model, DVector<f64>)> {
    match &cfg.problem {
        ProblemConfig::Sod(c) => {
            let sys = Euler1d::new(c.clone()).map_err(config)?;
            let u0 = sys.sod_initial_condition();
            Ok((Model::Sod(sys), u0))
        }
        ProblemConfig::LtiDiffusion(c) => {
            let dx = c.length / (c.n + 1) as f64;
            let sys = make_diffusion_lti(c.n, dx).map_err(config)?;
            // Three odd sine modes plus an asymmetric bump that excites every mode.
            let u0 = DVector::from_fn(c.n, |i, _| {
                let s = (i + 1) as f64 * dx / c.length;
                let x = std::f64::consts::PI * s;
                x.sin() + 0.5 * (3.0 * x).sin() + 0.25 * (5.0 * x).sin() + 4.0 * s * s * (1.0 - s)
            });
            Ok((Model::Lti(sys), u0))
        }
        ProblemConfig::LtiFile(c) => {
            let a = artifact(&c.path, read_matrix(&c.path))?;
            let sys = LtiSystem::new(a).map_err(|e| CliError::Config(format!("problem.path: {e}")))?;
            let n = sys.dim();
            let u0 = match &c.u0_path {
                Some(p) => {
                    let m = artifact(p, read_matrix(p))?;
                    if m.nrows() != n || m.ncols() != 1 {
                        return Err(CliError::Config(format!("problem.u0_path: expected a {n}x1 matrix, got {}x{}", m.nrows(), m.ncols())));
                    }
                    m.column(0).clone_owned()
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                    let norm = v.norm();
                    v / norm
                }
            };
            Ok((Model::Lti(sys), u0))
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt)
}

fn cmd_fom_run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let (model, u0) = build_problem(cfg)?;
    let save_every = cfg.outputs.snapshot_every;
    let traj = with_model!(&model, sys => integrate(&FomOde(sys), &cfg.fom, &u0, save_every, |_, _| Ok(()))).map_err(solver)?;
    ctx.ensure_out()?;
    let snaps = snapshot_matrix(&traj);
    let skip = usize::from(traj.states.len() > 1);
    let meta = SnapshotMeta { times: traj.times[skip..].to_vec(), dt: cfg.fom.dt, save_every, n_vars: cfg.state_vars() };
    let p = ctx.path(SNAPSHOTS);
    write_snapshots(&p, &snaps, &meta).map_err(|e| io_err(&p, e))?;
    let p = ctx.path(INITIAL_CONDITION);
    write_matrix(&p, &DMatrix::from_column_slice(u0.len(), 1, u0.as_slice())).map_err(|e| io_err(&p, e))?;
    println!("fom-run: {} steps, {} snapshots of dimension {}, {:.3} s", traj.steps, snaps.ncols(), snaps.nrows(), traj.wall_time);
    print!("{}", conservation_report(&model, &u0, traj.last()));
    Ok(())
}

/// Totals of each conserved variable at the start and end of the run.
pub fn conservation_report(model: &Model, first: &DVector<f64>, last: &DVector<f64>) -> String {
    let mut s = String::new();
    match model {
        Model::Sod(sys) => {
            let n = sys.n_cells();
            let dx = sys.dx();
            for (v, name) in ["mass", "momentum", "energy"].iter().enumerate() {
                let a: f64 = first.rows(v * n, n).sum() * dx;
                let b: f64 = last.rows(v * n, n).sum() * dx;
                let _ = writeln!(s, "  total {name}: initial {a:.12e}, final {b:.12e}, change {:.3e}", b - a);
            }
        }
        Model::Lti(_) => {
            let _ = writeln!(s, "  state norm: initial {:.12e}, final {:.12e}", first.norm(), last.norm());
        }
    }
    s
}

fn check_rows(what: &Path, rows: usize, dim: usize) -> CliResult<()> {
    if rows != dim {
        return Err(CliError::Config(format!("{} has {rows} rows but the problem has dimension {dim}", what.display())));
    }
    Ok(())
}

fn cmd_pod_build(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let (model, _) = build_problem(cfg)?;
    let sp = ctx.path(SNAPSHOTS);
    let (snaps, _) = artifact(&sp, read_snapshots(&sp))?;
    let dim = with_model!(&model, sys => sys.dim());
    check_rows(&sp, snaps.nrows(), dim)?;
    let (basis, sigmas) = per_variable_basis(&snaps, cfg.pod_blocks(), cfg.truncation()).map_err(|e| match e {
        RomError::InvalidArgument(m) => CliError::Config(format!("pod.truncation: {m}")),
        other => solver(other),
    })?;
    let p = ctx.path(BASIS);
    write_basis(&p, &basis, &sigmas).map_err(|e| io_err(&p, e))?;
    let mut csv = String::from("block,index,singular_value [state]\n");
    for (b, sig) in sigmas.iter().enumerate() {
        for (i, s) in sig.iter().enumerate() {
            let _ = writeln!(csv, "{b},{i},{}", fmt(*s));
        }
    }
    ctx.write("singular_values.csv", &csv)?;
    println!("pod-build: K = {} from {} snapshots", basis.reduced_dim(), snaps.ncols());
    if let Some(h) = cfg.hyper {
        let hd = with_model!(&model, sys => hyper_from_snapshots(sys, &basis, &snaps, h.r, h.target_np)).map_err(|e| match e {
            RomError::RankDeficientSampling { .. } => CliError::Config(format!("hyper.r: {e}")),
            other => solver(other),
        })?;
        let p = ctx.path(HYPER);
        write_hyper(&p, &hd).map_err(|e| io_err(&p, e))?;
        println!("pod-build: hyper-reduction r = {}, {} sampled rows, {} stencil rows", hd.rank(), hd.n_samples(), hd.n_stencil());
    }
    Ok(())
}

fn load_basis(ctx: &Context, dim: usize) -> CliResult<TrialBasis> {
    let p = ctx.path(BASIS);
    let (basis, _) = artifact(&p, read_basis(&p))?;
    check_rows(&p, basis.full_dim(), dim)?;
    Ok(basis)
}

/// FOM reference from the saved snapshots and the initial condition, if snapshots exist.
fn load_reference(ctx: &Context, basis: &TrialBasis, u0: &DVector<f64>) -> CliResult<Option<ProjectedReference>> {
    let p = ctx.path(SNAPSHOTS);
    if !p.exists() {
        return Ok(None);
    }
    let (snaps, meta) = artifact(&p, read_snapshots(&p))?;
    check_rows(&p, snaps.nrows(), u0.len())?;
    let mut times = Vec::with_capacity(meta.times.len() + 1);
    let mut states = Vec::with_capacity(meta.times.len() + 1);
    if meta.times.first() != Some(&0.0) {
        times.push(0.0);
        states.push(u0.clone());
    }
    times.extend_from_slice(&meta.times);
    states.extend(snaps.column_iter().map(|c| c.clone_owned()));
    Ok(Some(ProjectedReference::new(basis, &times, &states).map_err(solver)?))
}

fn cmd_rom_run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let rc = &cfg.rom;
    let (model, u0) = build_problem(cfg)?;
    let dim = with_model!(&model, sys => sys.dim());
    let basis = load_basis(ctx, dim)?;
    let reference = load_reference(ctx, &basis, &u0)?;
    let a0 = basis.reduce(&u0);
    let tau = match (rc.method, rc.tau) {
        (MethodKind::Apg, Some(t)) => t,
        (MethodKind::Apg, None) => with_model!(&model, sys => tau_heuristic(sys, &basis, &a0, rc.tau_c)).map_err(solver)?.tau,
        _ => 0.0,
    };
    let mut opts = rc.run_options(rc.method, rc.scheme, rc.dt, cfg.fom.t_final, tau).map_err(CliError::Config)?;
    opts.save_every = cfg.rom_save_every(rc.dt);
    let run = if cfg.hyper.is_some() {
        if opts.per_step_tau.is_some() {
            return Err(CliError::Config("rom.per_step_tau: not available with hyper-reduction".into()));
        }
        let p = ctx.path(HYPER);
        with_model!(&model, sys => {
            let hd = artifact(&p, read_hyper(&p, sys, &basis))?;
            match opts.method {
                RomMethod::Galerkin => run_hyper(sys, &hd, &a0, 0.0, rc.jac_mode, &opts),
                RomMethod::Apg { tau, jac_mode } => run_hyper(sys, &hd, &a0, tau, jac_mode, &opts),
                RomMethod::Lspg { .. } => run_collocated_lspg(sys, &basis, &hd.sample_indices, &a0, &opts),
            }
        })
    } else {
        with_model!(&model, sys => run_rom(sys, &basis, &a0, &opts))
    }
    .map_err(solver)?;
    let errors = match &reference {
        Some(r) if run.is_stable() => Some(error_norm(&run, r).map_err(|e| CliError::Config(format!("rom.dt: saved times do not match the snapshots: {e}")))?),
        _ => None,
    };
    ctx.ensure_out()?;
    let p = ctx.path("rom_coords.bin");
    write_matrix(&p, &DMatrix::from_columns(&run.coords)).map_err(|e| io_err(&p, e))?;
    let mut csv = String::from("t [time],coord_norm [state],error [state],newton_iterations [count],gmres_iterations [count]\n");
    for (i, (t, a)) in run.times.iter().zip(&run.coords).enumerate() {
        let e = errors.as_ref().map(|h| h.errors[i]);
        let w = run.saved_work.get(i).copied().unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", fmt(*t), fmt(a.norm()), fmt_opt(e), w.newton_iterations, w.linear_iterations);
    }
    ctx.write("rom_record.csv", &csv)?;
    let integrated = errors.as_ref().map(|h| h.integrated);
    let mut summary = String::from(
        "method,scheme,k [count],dt [time],tau [time],stable,integrated_error [state],steps [count],newton_iterations [count],gmres_iterations [count],wall_time [s]\n",
    );
    let _ = writeln!(
        summary,
        "{},{},{},{},{},{},{},{},{},{},{}",
        rc.method.name(),
        scheme_name(rc.scheme),
        basis.reduced_dim(),
        fmt(rc.dt),
        fmt_opt(run.tau),
        run.is_stable(),
        fmt_opt(integrated),
        run.steps,
        run.newton_iterations,
        run.linear_iterations,
        fmt(run.wall_time)
    );
    ctx.write("rom_summary.csv", &summary)?;
    match &run.status {
        RunStatus::Completed => {
            println!(
                "rom-run: {} K = {}, {} steps in {:.3} s, integrated error {}",
                rc.method.name(),
                basis.reduced_dim(),
                run.steps,
                run.wall_time,
                integrated.map_or("n/a".into(), |e| format!("{e:.6e}"))
            );
            Ok(())
        }
        RunStatus::Unstable { t, reason } => Err(CliError::Solver(format!("unstable at t = {t}: {reason}"))),
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::ExplicitEuler => "explicit_euler",
        Scheme::SspRk3 => "ssp_rk3",
        Scheme::ImplicitEuler => "implicit_euler",
        Scheme::CrankNicolson => "crank_nicolson",
    }
}

/// Operation-count model for a method and scheme.
pub fn cost_algorithm(method: MethodKind, scheme: Scheme, solver: LinearSolver) -> Algorithm {
    match (method, scheme.is_implicit(), solver) {
        (MethodKind::Galerkin, false, _) => Algorithm::GalerkinExplicit,
        (MethodKind::Apg, false, _) => Algorithm::ApgExplicit,
        (MethodKind::Galerkin, true, _) => Algorithm::GalerkinImplicit,
        (MethodKind::Apg, true, LinearSolver::JfnkGmres { .. }) => Algorithm::ApgJfnk,
        (MethodKind::Apg, true, LinearSolver::Direct) => Algorithm::ApgImplicit,
        (MethodKind::Lspg, _, _) => Algorithm::Lspg,
    }
}

fn stages(s: Scheme) -> u64 {
    match s {
        Scheme::SspRk3 => 3,
        _ => 1,
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub k: usize,
    pub method: MethodKind,
    pub scheme: Scheme,
    pub dt: f64,
    pub tau_choice: String,
    pub tau: Option<f64>,
    pub rho: Option<f64>,
    pub stable: bool,
    pub integrated_error: Option<f64>,
    pub steps: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub model_flops: i128,
    pub wall_time: f64,
    pub note: String,
}

pub const SWEEP_HEADER: &str = "k [count],method,scheme,dt [time],tau_choice,tau [time],rho [1/time],stable,integrated_error [state],steps [count],newton_iterations [count],gmres_iterations [count],model_flops [flop],note";

impl SweepRow {
    fn key(&self) -> String {
        format!("{},{},{},{},{}", self.k, self.method.name(), scheme_name(self.scheme), fmt(self.dt), self.tau_choice)
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.key(),
            fmt_opt(self.tau),
            fmt_opt(self.rho),
            self.stable,
            fmt_opt(self.integrated_error),
            self.steps,
            self.newton_iterations,
            self.linear_iterations,
            self.model_flops,
            self.note.replace([',', '\n'], ";")
        )
    }
}

fn tau_choice_label(c: &TauChoice) -> String {
    match c {
        TauChoice::Value(_) => "fixed".into(),
        TauChoice::Rule(_) => "heuristic".into(),
        TauChoice::Misfit { misfit } => format!("misfit({};{};{})", misfit.c_min, misfit.c_max, misfit.points),
    }
}

struct KCase {
    k: usize,
    basis: TrialBasis,
    reference: ProjectedReference,
    a0: DVector<f64>,
    /// Spectral radius of the coarse Jacobian at `a0`.
    rho: std::result::Result<f64, String>,
}

struct Job<'a> {
    case: &'a KCase,
    dt: f64,
    spec: MethodSpec,
    tau: Option<TauChoice>,
}

fn cmd_sweep(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep: section required".into()))?;
    let (model, u0) = build_problem(cfg)?;
    let sp = ctx.path(SNAPSHOTS);
    let (snaps, meta) = artifact(&sp, read_snapshots(&sp))?;
    check_rows(&sp, snaps.nrows(), u0.len())?;
    let pods = per_variable_pods(&snaps, cfg.pod_blocks()).map_err(solver)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    if meta.times.first() != Some(&0.0) {
        times.push(0.0);
        states.push(u0.clone());
    }
    times.extend_from_slice(&meta.times);
    states.extend(snaps.column_iter().map(|c| c.clone_owned()));
    let cases: Vec<KCase> = sweep
        .k
        .par_iter()
        .map(|&k| {
            let basis = basis_from_pods(&pods, Truncation::Modes(k / cfg.pod_blocks())).map_err(|e| CliError::Config(format!("sweep.k: {e}")))?;
            let reference = ProjectedReference::new(&basis, &times, &states).map_err(solver)?;
            let a0 = basis.reduce(&u0);
            let rho = with_model!(&model, sys => tau_heuristic(sys, &basis, &a0, 1.0)).map(|t| t.rho).map_err(|e| e.to_string());
            Ok(KCase { k, basis, reference, a0, rho })
        })
        .collect::<CliResult<_>>()?;
    let mut jobs = Vec::new();
    for case in &cases {
        for &dt in &sweep.dt {
            for &spec in &sweep.methods {
                if spec.method == MethodKind::Apg {
                    jobs.extend(sweep.tau.iter().map(|&t| Job { case, dt, spec, tau: Some(t) }));
                } else {
                    jobs.push(Job { case, dt, spec, tau: None });
                }
            }
        }
    }
    let rows: Vec<SweepRow> = jobs.par_iter().map(|job| with_model!(&model, sys => sweep_job(sys, cfg, job))).collect();
    ctx.ensure_out()?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut timing = String::from("k [count],method,scheme,dt [time],tau_choice,wall_time [s]\n");
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv_line());
        let _ = writeln!(timing, "{},{}", r.key(), fmt(r.wall_time));
    }
    ctx.write("sweep.csv", &csv)?;
    ctx.write("sweep_timing.csv", &timing)?;
    let stable = rows.iter().filter(|r| r.stable).count();
    println!("sweep: {} runs, {} stable", rows.len(), stable);
    Ok(())
}

fn sweep_job<S: FomSystem + ?Sized>(sys: &S, cfg: &RunConfig, job: &Job) -> SweepRow {
    let case = job.case;
    let MethodSpec { method, scheme } = job.spec;
    let mut row = SweepRow {
        k: case.k,
        method,
        scheme,
        dt: job.dt,
        tau_choice: job.tau.as_ref().map_or_else(|| "none".into(), tau_choice_label),
        tau: None,
        rho: case.rho.as_ref().ok().copied(),
        stable: false,
        integrated_error: None,
        steps: 0,
        newton_iterations: 0,
        linear_iterations: 0,
        model_flops: 0,
        wall_time: 0.0,
        note: String::new(),
    };
    let outcome = (|| -> std::result::Result<RomRun, String> {
        let save_every = cfg.rom_save_every(job.dt);
        let run_at = |tau: f64| -> crate::Result<RomRun> {
            let mut opts = cfg.rom.run_options(method, scheme, job.dt, cfg.fom.t_final, tau).map_err(RomError::InvalidArgument)?;
            opts.save_every = save_every;
            run_rom(sys, &case.basis, &case.a0, &opts)
        };
        let tau = match job.tau {
            None => 0.0,
            Some(TauChoice::Value(v)) => v,
            Some(TauChoice::Rule(_)) => cfg.rom.tau_c / case.rho.clone()?,
            Some(TauChoice::Misfit { misfit }) => {
                let rho = case.rho.clone()?;
                let grid: Vec<f64> = log_grid(misfit.c_min, misfit.c_max, misfit.points).into_iter().map(|c| c / rho).collect();
                let count = case.reference.times.len().saturating_sub(1).max(1);
                misfit_tau(&grid, run_at, &case.reference, 1, count).map_err(|e| e.to_string())?.tau_opt
            }
        };
        if job.tau.is_some() {
            row.tau = Some(tau);
        }
        run_at(tau).map_err(|e| e.to_string())
    })();
    match outcome {
        Ok(run) => {
            row.steps = run.steps;
            row.newton_iterations = run.newton_iterations;
            row.linear_iterations = run.linear_iterations;
            row.wall_time = run.wall_time;
            let alg = cost_algorithm(method, scheme, cfg.rom.linear_solver);
            let per = flop_estimate(&cfg.cost.model_for(sys.dim() as u64, case.k as u64), alg);
            let units = if scheme.is_implicit() { run.newton_iterations as u64 } else { run.steps as u64 * stages(scheme) };
            row.model_flops = per * i128::from(units);
            match &run.status {
                RunStatus::Completed => match error_norm(&run, &case.reference) {
                    Ok(h) => {
                        row.stable = true;
                        row.integrated_error = Some(h.integrated);
                    }
                    Err(e) => row.note = e.to_string(),
                },
                RunStatus::Unstable { t, reason } => row.note = format!("unstable at t = {t}: {reason}"),
            }
        }
        Err(e) => row.note = e,
    }
    row
}

fn cmd_verify(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let vc = &cfg.verify;
    let (model, u0) = build_problem(cfg)?;
    let Model::Lti(sys) = &model else {
        return Err(CliError::Config("problem.kind: verify needs an LTI problem".into()));
    };
    let n = sys.dim();
    if vc.k > n {
        return Err(CliError::Config(format!("verify.k: {} exceeds the dimension {n}", vc.k)));
    }
    let v = match vc.basis {
        VerifyBasis::Random => random_orthonormal(n, vc.k, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
        VerifyBasis::Eigen => sym_eigen_desc(sys.matrix()).1.columns(0, vc.k).clone_owned(),
    };
    let basis = TrialBasis::new(v).map_err(solver)?;
    let report = verify_all(sys, &basis, &u0, vc.t_final, vc.grid_points).map_err(|e| match e {
        RomError::AssumptionViolated(m) => CliError::Verification(m),
        other => solver(other),
    })?;
    ctx.ensure_out()?;
    ctx.write("verify.csv", &report.to_csv())?;
    println!("verify: {}", report.summary());
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{} assertion(s) failed", report.failures().count())))
    }
}

fn cmd_cost(ctx: &Context) -> CliResult<()> {
    let c = &ctx.cfg.cost;
    let mut csv = String::from("n [count],k [count],algorithm,flops_per_step [flop],relative_to_galerkin [ratio]\n");
    let mut k = c.k_step;
    while k <= c.k_max {
        let m = c.model(k);
        for alg in Algorithm::ALL {
            let _ = writeln!(csv, "{},{k},{},{},{}", c.n, alg.name(), flop_estimate(&m, alg), fmt(relative_cost(&m, alg)));
        }
        k += c.k_step;
    }
    ctx.ensure_out()?;
    ctx.write("cost.csv", &csv)?;
    let m = c.model(c.k_max);
    println!(
        "cost: N = {}, omega = {}, K = {}: APG/Galerkin explicit {:.3}, implicit {:.3}, LSPG/Galerkin implicit {:.3}",
        c.n,
        c.omega,
        c.k_max,
        relative_cost(&m, Algorithm::ApgExplicit),
        relative_cost(&m, Algorithm::ApgImplicit),
        relative_cost(&m, Algorithm::Lspg)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Solver(String::new()).exit_code(), 3);
        assert_eq!(CliError::MissingArtifact { path: PathBuf::new(), reason: String::new() }.exit_code(), 4);
        assert_eq!(CliError::Verification(String::new()).exit_code(), 5);
    }

    #[test]
    fn cost_algorithms_match_method_and_scheme() {
        assert_eq!(cost_algorithm(MethodKind::Apg, Scheme::SspRk3, LinearSolver::Direct), Algorithm::ApgExplicit);
        assert_eq!(cost_algorithm(MethodKind::Galerkin, Scheme::ImplicitEuler, LinearSolver::Direct), Algorithm::GalerkinImplicit);
        assert_eq!(cost_algorithm(MethodKind::Apg, Scheme::ImplicitEuler, LinearSolver::JfnkGmres { max_krylov: 5 }), Algorithm::ApgJfnk);
        assert_eq!(cost_algorithm(MethodKind::Lspg, Scheme::CrankNicolson, LinearSolver::Direct), Algorithm::Lspg);
    }

    #[test]
    fn diffusion_initial_condition_vanishes_at_the_walls() {
        let cfg = RunConfig::from_json(r#"{"problem": {"kind": "lti-diffusion", "n": 99}}"#).unwrap();
        let (model, u0) = build_problem(&cfg).unwrap();
        assert!(matches!(model, Model::Lti(_)));
        assert_eq!(u0.len(), 99);
        // x = 0.5 at the middle point: sin(π/2) + 0.5 sin(3π/2) + 0.25 sin(5π/2) + 4·0.25·0.5.
        assert!((u0[49] - 1.25).abs() < 1e-12);
        // One cell from each wall the profile is O(dx).
        assert!(u0[0].abs() < 0.2 && u0[98].abs() < 0.2);
    }
}
