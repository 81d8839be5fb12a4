//! Selection of the APG time scale by minimizing the error misfit over a grid.

use rayon::prelude::*;

use crate::analysis::error::{error_norm, ProjectedReference};
use crate::error::{RomError, Result};
use crate::rom::RomRun;

/// Misfit of every grid point and the minimizer.
#[derive(Debug, Clone)]
pub struct MisfitResult {
    pub tau_opt: f64,
    pub misfit_opt: f64,
    /// Grid sorted ascending.
    pub taus: Vec<f64>,
    /// `None` where the run was unstable.
    pub values: Vec<Option<f64>>,
}

/// Sum of the error norms at saved samples `stride, 2·stride, …, count·stride`.
pub fn misfit_value(run: &RomRun, reference: &ProjectedReference, stride: usize, count: usize) -> Result<f64> {
    let hist = error_norm(run, reference)?;
    let stride = stride.max(1);
    let mut total = 0.0;
    for i in 1..=count {
        let e = hist.errors.get(i * stride).ok_or_else(|| {
            RomError::InvalidArgument(format!("misfit sample {} beyond {} saved states", i * stride, hist.errors.len()))
        })?;
        total += e;
    }
    Ok(total)
}

/// Evaluate the misfit for each `τ` (in parallel) and return the smallest-`τ` minimizer.
pub fn misfit_tau<F>(tau_grid: &[f64], rom_factory: F, reference: &ProjectedReference, stride: usize, count: usize) -> Result<MisfitResult>
where
    F: Fn(f64) -> Result<RomRun> + Sync,
{
    if tau_grid.is_empty() {
        return Err(RomError::InvalidArgument("empty τ grid".into()));
    }
    let mut taus = tau_grid.to_vec();
    if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(RomError::InvalidArgument("τ must be finite and nonnegative".into()));
    }
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let values = taus
        .par_iter()
        .map(|&tau| {
            let run = rom_factory(tau)?;
            if run.is_stable() {
                misfit_value(&run, reference, stride, count).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, f64)> = None;
    for (&tau, v) in taus.iter().zip(&values) {
        if let Some(j) = *v {
            if j.is_finite() && best.is_none_or(|(_, b)| j < b) {
                best = Some((tau, j));
            }
        }
    }
    let (tau_opt, misfit_opt) = best.ok_or(RomError::AllRunsUnstable)?;
    Ok(MisfitResult { tau_opt, misfit_opt, taus, values })
}

/// Logarithmic grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Coarse logarithmic search followed by a linear refinement around the coarse minimizer.
pub fn misfit_tau_refined<F>(
    lo: f64,
    hi: f64,
    coarse: usize,
    fine: usize,
    rom_factory: F,
    reference: &ProjectedReference,
    stride: usize,
    count: usize,
) -> Result<MisfitResult>
where
    F: Fn(f64) -> Result<RomRun> + Sync,
{
    let grid = log_grid(lo, hi, coarse);
    let first = misfit_tau(&grid, &rom_factory, reference, stride, count)?;
    let i = first.taus.iter().position(|&t| t == first.tau_opt).expect("minimizer is on the grid");
    let left = if i == 0 { first.taus[0] * (first.taus[0] / first.taus[1.min(first.taus.len() - 1)]) } else { first.taus[i - 1] };
    let right = first.taus.get(i + 1).copied().unwrap_or(first.tau_opt * first.tau_opt / left);
    let refine: Vec<f64> = (0..fine).map(|j| left + (right - left) * (j as f64 + 1.0) / (fine as f64 + 1.0)).collect();
    let second = misfit_tau(&refine, &rom_factory, reference, stride, count).unwrap_or(MisfitResult {
        tau_opt: f64::NAN,
        misfit_opt: f64::INFINITY,
        taus: Vec::new(),
        values: Vec::new(),
    });
    let mut merged: Vec<(f64, Option<f64>)> = first.taus.iter().copied().zip(first.values).chain(second.taus.into_iter().zip(second.values)).collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (tau_opt, misfit_opt) = if second.misfit_opt < first.misfit_opt || (second.misfit_opt == first.misfit_opt && second.tau_opt < first.tau_opt) {
        (second.tau_opt, second.misfit_opt)
    } else {
        (first.tau_opt, first.misfit_opt)
    };
    Ok(MisfitResult { tau_opt, misfit_opt, taus: merged.iter().map(|p| p.0).collect(), values: merged.iter().map(|p| p.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::TrialBasis;
    use crate::dynamics::LtiSystem;
    use crate::rom::{run_rom, JacMode, RomMethod, RomRunOptions};
    use crate::timeint::{integrate, IntegratorSpec, Scheme};
    use nalgebra::{DMatrix, DVector};

    struct Setup {
        sys: LtiSystem,
        basis: TrialBasis,
        u0: DVector<f64>,
        reference: ProjectedReference,
    }

    fn setup(a: DMatrix<f64>, k: usize) -> Setup {
        let n = a.nrows();
        let sys = LtiSystem::new(a).unwrap();
        let basis = TrialBasis::new(DMatrix::identity(n, k)).unwrap();
        let u0 = DVector::from_fn(n, |i, _| 1.0 / (1.0 + i as f64));
        let spec = IntegratorSpec { scheme: Scheme::SspRk3, dt: 0.01, t_final: 2.0, ..Default::default() };
        let fom = integrate(&crate::dynamics::FomOde(&sys), &spec, &u0, 1, |_, _| Ok(())).unwrap();
        let reference = ProjectedReference::new(&basis, &fom.times, &fom.states).unwrap();
        Setup { sys, basis, u0, reference }
    }

    fn factory(s: &Setup) -> impl Fn(f64) -> Result<RomRun> + Sync + '_ {
        move |tau| {
            let spec = IntegratorSpec { scheme: Scheme::SspRk3, dt: 0.01, t_final: 2.0, ..Default::default() };
            let method = if tau == 0.0 { RomMethod::Galerkin } else { RomMethod::Apg { tau, jac_mode: JacMode::Exact } };
            let opts = RomRunOptions::new(method, spec);
            run_rom(&s.sys, &s.basis, &s.basis.reduce(&s.u0), &opts)
        }
    }

    #[test]
    fn zero_only_grid_gives_galerkin_misfit() {
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { -1.0 - i as f64 } else if i.abs_diff(j) == 1 { 0.4 } else { 0.0 });
        let s = setup(a, 2);
        let res = misfit_tau(&[0.0], factory(&s), &s.reference, 10, 20).unwrap();
        assert_eq!(res.tau_opt, 0.0);
        let g = factory(&s)(0.0).unwrap();
        assert_eq!(res.misfit_opt, misfit_value(&g, &s.reference, 10, 20).unwrap());
    }

    #[test]
    fn decoupled_system_ties_break_to_smallest_tau() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0, -4.0]));
        let s = setup(a, 2);
        let res = misfit_tau(&[0.3, 0.1, 0.2], factory(&s), &s.reference, 10, 20).unwrap();
        assert_eq!(res.taus, vec![0.1, 0.2, 0.3]);
        let v: Vec<f64> = res.values.iter().map(|v| v.unwrap()).collect();
        assert!(v.iter().all(|&x| x == v[0]));
        assert_eq!(res.tau_opt, 0.1);
    }

    #[test]
    fn unstable_everywhere_is_an_error() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let s = setup(a, 1);
        let unstable = |_tau: f64| {
            let mut run = factory(&s)(0.0)?;
            run.status = crate::rom::RunStatus::Unstable { t: 0.5, reason: "test".into() };
            Ok(run)
        };
        assert!(matches!(misfit_tau(&[0.1, 0.2], unstable, &s.reference, 10, 20), Err(RomError::AllRunsUnstable)));
        assert!(misfit_tau(&[], factory(&s), &s.reference, 10, 20).is_err());
    }

    #[test]
    fn refined_search_improves_on_coarse_grid() {
        let a = DMatrix::from_fn(6, 6, |i, j| if i == j { -1.0 - 2.0 * i as f64 } else if i.abs_diff(j) == 1 { 0.8 } else { 0.0 });
        let s = setup(a, 2);
        let coarse = misfit_tau(&log_grid(1e-3, 1.0, 5), factory(&s), &s.reference, 10, 20).unwrap();
        let refined = misfit_tau_refined(1e-3, 1.0, 5, 6, factory(&s), &s.reference, 10, 20).unwrap();
        assert!(refined.misfit_opt <= coarse.misfit_opt);
        assert!(refined.taus.len() > coarse.taus.len());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-2, 3);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[1] - 1e-3).abs() < 1e-15 && (g[2] - 1e-2).abs() < 1e-15);
    }
}
