//! POD bases, block-structured trial bases and the coarse/fine projectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, RomError, Result};
use crate::linalg::orthonormality_defect;

/// Left singular vectors and singular values of a snapshot matrix.
#[derive(Debug, Clone)]
pub struct Pod {
    pub modes: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

/// Thin SVD of the snapshot matrix, σ descending, with σ ≤ 1e-12·σ₁ dropped.
/// Each mode is signed so that its largest-magnitude entry is positive.
pub fn pod_build(snapshots: &DMatrix<f64>) -> Result<Pod> {
    if snapshots.nrows() == 0 || snapshots.ncols() == 0 {
        return Err(RomError::EmptySnapshots);
    }
    let svd = snapshots.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let smax = order.first().map_or(0.0, |&i| s[i]);
    let keep: Vec<usize> = order.into_iter().filter(|&i| s[i] > 1e-12 * smax && s[i] > 0.0).collect();
    let mut modes = DMatrix::<f64>::zeros(snapshots.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let mut col = u.column(i).clone_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        modes.set_column(c, &col);
    }
    let singular_values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| s[i]));
    Ok(Pod { modes, singular_values })
}

/// Smallest `K` whose leading singular values hold at least `criterion` of the energy Σσ².
pub fn truncate_energy(sigma: &DVector<f64>, criterion: f64) -> Result<usize> {
    if !(criterion > 0.0 && criterion <= 1.0) {
        return Err(RomError::InvalidCriterion(criterion));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(RomError::InvalidArgument("singular values carry no energy".into()));
    }
    let nonzero = sigma.iter().filter(|&&s| s > 0.0).count();
    let target = criterion * total * (1.0 - 1e-14);
    let mut cum = 0.0;
    for (k, s) in sigma.iter().enumerate() {
        cum += s * s;
        if cum >= target {
            return Ok(k + 1);
        }
    }
    Ok(nonzero)
}

/// Orthonormal modes supported on a subset of state rows.
#[derive(Debug, Clone)]
pub struct BasisBlock {
    pub rows: Vec<usize>,
    pub modes: DMatrix<f64>,
}

/// Placement of one block inside the global basis.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub rows: Vec<usize>,
    pub col_start: usize,
    pub ncols: usize,
    contiguous_start: Option<usize>,
    modes: DMatrix<f64>,
    modes_t: DMatrix<f64>,
}

/// Orthonormal trial basis `Ṽ` (N × K) with an optional block-diagonal layout.
#[derive(Debug, Clone)]
pub struct TrialBasis {
    v: DMatrix<f64>,
    vt: DMatrix<f64>,
    blocks: Option<Vec<BlockLayout>>,
}

impl TrialBasis {
    /// Wrap a dense basis; its columns must be orthonormal to 1e-10.
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        let deviation = orthonormality_defect(&v);
        if deviation > 1e-10 {
            return Err(RomError::NonOrthonormalBlock { block: 0, deviation });
        }
        let vt = v.transpose();
        Ok(TrialBasis { v, vt, blocks: None })
    }

    pub fn full_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn reduced_dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn block_layout(&self) -> Option<&[BlockLayout]> {
        self.blocks.as_deref()
    }

    /// `Ṽᵀ x`.
    pub fn reduce(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.blocks {
            Some(blocks) => {
                let mut a = DVector::zeros(self.reduced_dim());
                for b in blocks {
                    let part = match b.contiguous_start {
                        Some(s) => &b.modes_t * x.rows(s, b.rows.len()),
                        None => &b.modes_t * DVector::from_iterator(b.rows.len(), b.rows.iter().map(|&r| x[r])),
                    };
                    a.rows_mut(b.col_start, b.ncols).copy_from(&part);
                }
                a
            }
            None => &self.vt * x,
        }
    }

    /// `Ṽ a`.
    pub fn reconstruct(&self, a: &DVector<f64>) -> DVector<f64> {
        match &self.blocks {
            Some(blocks) => {
                let mut x = DVector::zeros(self.full_dim());
                for b in blocks {
                    let part = &b.modes * a.rows(b.col_start, b.ncols);
                    match b.contiguous_start {
                        Some(s) => x.rows_mut(s, b.rows.len()).copy_from(&part),
                        None => {
                            for (k, &r) in b.rows.iter().enumerate() {
                                x[r] = part[k];
                            }
                        }
                    }
                }
                x
            }
            None => &self.v * a,
        }
    }

    /// `Ṽᵀ X`.
    pub fn reduce_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.blocks {
            Some(blocks) => {
                let mut out = DMatrix::zeros(self.reduced_dim(), x.ncols());
                for b in blocks {
                    let part = match b.contiguous_start {
                        Some(s) => &b.modes_t * x.rows(s, b.rows.len()),
                        None => &b.modes_t * x.select_rows(b.rows.iter()),
                    };
                    out.rows_mut(b.col_start, b.ncols).copy_from(&part);
                }
                out
            }
            None => &self.vt * x,
        }
    }

    /// `Ṽ A`.
    pub fn reconstruct_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.blocks {
            Some(blocks) => {
                let mut out = DMatrix::zeros(self.full_dim(), a.ncols());
                for b in blocks {
                    let part = &b.modes * a.rows(b.col_start, b.ncols);
                    match b.contiguous_start {
                        Some(s) => out.rows_mut(s, b.rows.len()).copy_from(&part),
                        None => {
                            for (k, &r) in b.rows.iter().enumerate() {
                                out.row_mut(r).copy_from(&part.row(k));
                            }
                        }
                    }
                }
                out
            }
            None => &self.v * a,
        }
    }

    /// Coarse-scale projection `Π̃ x = Ṽ Ṽᵀ x`.
    pub fn coarse(&self, x: &DVector<f64>) -> DVector<f64> {
        self.reconstruct(&self.reduce(x))
    }

    /// Fine-scale projection `Π′ x = x - Ṽ Ṽᵀ x`.
    pub fn fine(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.coarse(x)
    }

    /// Fine-scale projection of each column.
    pub fn fine_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x - self.reconstruct_mat(&self.reduce_mat(x))
    }

    /// Rows of `Ṽ` at the given state indices.
    pub fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.v.select_rows(idx.iter())
    }
}

/// Assemble blocks into one block-structured basis over `n_rows` state rows.
pub fn assemble_block_basis(n_rows: usize, blocks: Vec<BasisBlock>) -> Result<TrialBasis> {
    let mut owner = vec![false; n_rows];
    for (bi, b) in blocks.iter().enumerate() {
        check_dim(b.rows.len(), b.modes.nrows())?;
        for &r in &b.rows {
            if r >= n_rows {
                return Err(RomError::InvalidArgument(format!("block {bi} row {r} exceeds {n_rows}")));
            }
            if owner[r] {
                return Err(RomError::OverlappingBlocks { row: r });
            }
            owner[r] = true;
        }
        let deviation = orthonormality_defect(&b.modes);
        if deviation > 1e-10 {
            return Err(RomError::NonOrthonormalBlock { block: bi, deviation });
        }
    }
    let k: usize = blocks.iter().map(|b| b.modes.ncols()).sum();
    let mut v = DMatrix::<f64>::zeros(n_rows, k);
    let mut layout = Vec::with_capacity(blocks.len());
    let mut col = 0;
    for b in blocks {
        let kb = b.modes.ncols();
        for (i, &r) in b.rows.iter().enumerate() {
            v.view_mut((r, col), (1, kb)).copy_from(&b.modes.row(i));
        }
        let contiguous_start = match b.rows.first() {
            Some(&s) if b.rows.iter().enumerate().all(|(i, &r)| r == s + i) => Some(s),
            _ => None,
        };
        layout.push(BlockLayout {
            col_start: col,
            ncols: kb,
            contiguous_start,
            modes_t: b.modes.transpose(),
            modes: b.modes,
            rows: b.rows,
        });
        col += kb;
    }
    let vt = v.transpose();
    Ok(TrialBasis { v, vt, blocks: Some(layout) })
}

/// How many modes each variable block keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Modes(usize),
    Energy(f64),
}

/// POD of each variable block of a variable-major snapshot matrix.
pub fn per_variable_pods(snapshots: &DMatrix<f64>, n_vars: usize) -> Result<Vec<Pod>> {
    let n = snapshots.nrows();
    if n_vars == 0 || n % n_vars != 0 {
        return Err(RomError::InvalidArgument(format!("{n} rows do not split into {n_vars} variables")));
    }
    let m = n / n_vars;
    (0..n_vars).map(|var| pod_build(&snapshots.rows(var * m, m).clone_owned())).collect()
}

/// Block-diagonal basis from per-variable PODs, each truncated by `truncation`.
pub fn basis_from_pods(pods: &[Pod], truncation: Truncation) -> Result<TrialBasis> {
    let m = pods.first().map_or(0, |p| p.modes.nrows());
    let mut blocks = Vec::with_capacity(pods.len());
    for (var, pod) in pods.iter().enumerate() {
        let k = match truncation {
            Truncation::Modes(k) => k,
            Truncation::Energy(c) => truncate_energy(&pod.singular_values, c)?,
        };
        if k > pod.modes.ncols() {
            return Err(RomError::InvalidArgument(format!(
                "variable {var} has rank {} but {k} modes were requested",
                pod.modes.ncols()
            )));
        }
        blocks.push(BasisBlock { rows: (var * m..(var + 1) * m).collect(), modes: pod.modes.columns(0, k).clone_owned() });
    }
    assemble_block_basis(m * pods.len(), blocks)
}

/// Separate POD per variable on a variable-major state, assembled block-diagonally.
/// Returns the basis and each block's singular values.
pub fn per_variable_basis(
    snapshots: &DMatrix<f64>,
    n_vars: usize,
    truncation: Truncation,
) -> Result<(TrialBasis, Vec<DVector<f64>>)> {
    let pods = per_variable_pods(snapshots, n_vars)?;
    let basis = basis_from_pods(&pods, truncation)?;
    Ok((basis, pods.into_iter().map(|p| p.singular_values).collect()))
}

/// Reduced initial condition `Ṽᵀ u₀` and the size of the discarded part `‖Π′ u₀‖`.
pub fn project_initial_condition(basis: &TrialBasis, u0: &DVector<f64>) -> (DVector<f64>, f64) {
    let a0 = basis.reduce(u0);
    let residual = (u0 - basis.reconstruct(&a0)).norm();
    (a0, residual)
}
