//! Binary matrix files with JSON sidecar metadata.
//!
//! A matrix file is a 16-byte little-endian header (`b"ROMF"`, rows `u32`, cols `u32`,
//! dtype `u32`) followed by column-major data. The sidecar sits next to it with a `.json`
//! extension appended.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::basis::{assemble_block_basis, BasisBlock, TrialBasis};
use crate::dynamics::SampledSystem;
use crate::hyper::{hyper_from_rhs_basis, HyperData};
use crate::error::{RomError, Result};

pub const MAGIC: [u8; 4] = *b"ROMF";
pub const DTYPE_F64: u32 = 1;

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| RomError::Format("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| RomError::Format("too many columns".into()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&DTYPE_F64.to_le_bytes())?;
    for x in m.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| RomError::Format(format!("{}: truncated header", path.display())))?;
    if header[0..4] != MAGIC {
        return Err(RomError::Format(format!("{}: bad magic", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    let (rows, cols, dtype) = (word(4) as usize, word(8) as usize, word(12));
    if dtype != DTYPE_F64 {
        return Err(RomError::Format(format!("{}: unsupported dtype {dtype}", path.display())));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != rows * cols * 8 {
        return Err(RomError::Format(format!("{}: expected {} data bytes, found {}", path.display(), rows * cols * 8, bytes.len())));
    }
    let data: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(DMatrix::from_vec(rows, cols, data))
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sidecar<T: Serialize>(path: &Path, meta: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(|e| RomError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_sidecar<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let p = sidecar_path(path);
    let text = std::fs::read_to_string(&p)?;
    serde_json::from_str(&text).map_err(|e| RomError::Format(format!("{}: {e}", p.display())))
}

/// Metadata stored with a snapshot matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    /// Time of each column.
    pub times: Vec<f64>,
    pub dt: f64,
    pub save_every: usize,
    /// Number of conserved variables stacked variable-major.
    pub n_vars: usize,
}

/// One block of a stored basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMeta {
    pub rows: Vec<u32>,
    pub col_start: usize,
    pub ncols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisMeta {
    /// Empty for a dense basis.
    pub block_layout: Vec<BlockMeta>,
    /// Singular values of each block, or of the whole basis.
    pub singular_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperMeta {
    pub r: usize,
    pub sample_indices: Vec<u32>,
    pub stencil_indices: Vec<u32>,
    pub rhs_singular_values: Vec<f64>,
}

pub fn write_snapshots(path: &Path, states: &DMatrix<f64>, meta: &SnapshotMeta) -> Result<()> {
    if meta.times.len() != states.ncols() {
        return Err(RomError::DimensionMismatch { expected: states.ncols(), got: meta.times.len() });
    }
    write_matrix(path, states)?;
    write_sidecar(path, meta)
}

pub fn read_snapshots(path: &Path) -> Result<(DMatrix<f64>, SnapshotMeta)> {
    let m = read_matrix(path)?;
    let meta: SnapshotMeta = read_sidecar(path)?;
    if meta.times.len() != m.ncols() {
        return Err(RomError::Format(format!("{}: {} times for {} columns", path.display(), meta.times.len(), m.ncols())));
    }
    Ok((m, meta))
}

pub fn write_basis(path: &Path, basis: &TrialBasis, singular_values: &[DVector<f64>]) -> Result<()> {
    let block_layout = basis
        .block_layout()
        .map(|blocks| {
            blocks
                .iter()
                .map(|b| BlockMeta { rows: b.rows.iter().map(|&r| r as u32).collect(), col_start: b.col_start, ncols: b.ncols })
                .collect()
        })
        .unwrap_or_default();
    write_matrix(path, basis.matrix())?;
    write_sidecar(path, &BasisMeta { block_layout, singular_values: singular_values.iter().map(|s| s.iter().copied().collect()).collect() })
}

pub fn read_basis(path: &Path) -> Result<(TrialBasis, BasisMeta)> {
    let v = read_matrix(path)?;
    let meta: BasisMeta = read_sidecar(path)?;
    if meta.block_layout.is_empty() {
        return Ok((TrialBasis::new(v)?, meta));
    }
    let mut blocks = Vec::with_capacity(meta.block_layout.len());
    for b in &meta.block_layout {
        let rows: Vec<usize> = b.rows.iter().map(|&r| r as usize).collect();
        if rows.iter().any(|&r| r >= v.nrows()) || b.col_start + b.ncols > v.ncols() {
            return Err(RomError::Format(format!("{}: block layout out of range", path.display())));
        }
        let modes = v.select_rows(rows.iter()).columns(b.col_start, b.ncols).clone_owned();
        blocks.push(BasisBlock { rows, modes });
    }
    let basis = assemble_block_basis(v.nrows(), blocks)?;
    if (basis.matrix() - &v).amax() != 0.0 {
        return Err(RomError::Format(format!("{}: entries outside the block layout", path.display())));
    }
    Ok((basis, meta))
}

fn to_u32(v: &[usize]) -> Result<Vec<u32>> {
    v.iter().map(|&i| u32::try_from(i).map_err(|_| RomError::Format(format!("index {i} exceeds u32")))).collect()
}

/// Right-hand side basis `U` with sample and stencil indices in the sidecar.
pub fn write_hyper(path: &Path, hd: &HyperData) -> Result<()> {
    write_matrix(path, &hd.u_basis)?;
    write_sidecar(
        path,
        &HyperMeta {
            r: hd.rank(),
            sample_indices: to_u32(&hd.sample_indices)?,
            stencil_indices: to_u32(&hd.stencil_indices)?,
            rhs_singular_values: hd.rhs_singular_values.iter().copied().collect(),
        },
    )
}

/// Rebuild hyper-reduction data for `sys` and `basis`; the stored stencil must match `sys`.
pub fn read_hyper<S: SampledSystem + ?Sized>(path: &Path, sys: &S, basis: &TrialBasis) -> Result<HyperData> {
    let u = read_matrix(path)?;
    let meta: HyperMeta = read_sidecar(path)?;
    if meta.r != u.ncols() {
        return Err(RomError::Format(format!("{}: r = {} but {} columns stored", path.display(), meta.r, u.ncols())));
    }
    let samples: Vec<usize> = meta.sample_indices.iter().map(|&i| i as usize).collect();
    let sv = DVector::from_vec(meta.rhs_singular_values);
    let hd = hyper_from_rhs_basis(sys, basis, &u, &sv, meta.r, &samples)?;
    if to_u32(&hd.stencil_indices)? != meta.stencil_indices {
        return Err(RomError::Format(format!("{}: stencil does not match the system", path.display())));
    }
    Ok(hd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{per_variable_basis, Truncation};
    use proptest::prelude::*;

    #[test]
    fn header_layout_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        write_matrix(&p, &m).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"ROMF");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 6 * 8);
        // Column-major: second value is row 1, column 0.
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 4.0);
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOPE0000000000000000").unwrap();
        assert!(matches!(read_matrix(&p), Err(RomError::Format(_))));
        let mut ok = Vec::from(*b"ROMF");
        ok.extend([1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        std::fs::write(&p, &ok).unwrap();
        assert!(matches!(read_matrix(&p), Err(RomError::Format(_))));
        ok[12] = 1;
        std::fs::write(&p, &ok).unwrap();
        assert!(matches!(read_matrix(&p), Err(RomError::Format(_))));
        assert!(matches!(read_matrix(&dir.path().join("missing")), Err(RomError::Io(_))));
    }

    #[test]
    fn snapshots_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("snap.bin");
        let m = DMatrix::from_fn(4, 2, |i, j| (i * 10 + j) as f64);
        let meta = SnapshotMeta { times: vec![0.5, 1.0], dt: 0.25, save_every: 2, n_vars: 1 };
        write_snapshots(&p, &m, &meta).unwrap();
        assert!(sidecar_path(&p).exists());
        let (m2, meta2) = read_snapshots(&p).unwrap();
        assert_eq!(m2, m);
        assert_eq!(meta2, meta);
        let bad = SnapshotMeta { times: vec![0.5], ..meta };
        assert!(write_snapshots(&p, &m, &bad).is_err());
    }

    #[test]
    fn block_basis_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("basis.bin");
        let snaps = DMatrix::from_fn(12, 6, |i, j| ((i * 3 + j * 5) as f64 * 0.37).sin() + 0.1 * j as f64);
        let (basis, sig) = per_variable_basis(&snaps, 3, Truncation::Modes(2)).unwrap();
        write_basis(&p, &basis, &sig).unwrap();
        let (back, meta) = read_basis(&p).unwrap();
        assert_eq!(back.matrix(), basis.matrix());
        assert_eq!(meta.block_layout.len(), 3);
        assert_eq!(back.block_layout().unwrap().len(), 3);
    }

    #[test]
    fn hyper_roundtrip() {
        use crate::dynamics::{Euler1d, Euler1dConfig};
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("hyper.bin");
        let sys = Euler1d::new(Euler1dConfig { n_cells: 20, ..Default::default() }).unwrap();
        let u0 = sys.sod_initial_condition();
        let traj = crate::experiment::run_fom(&sys, &u0, 1e-3, 0.05, 1).unwrap();
        let states = crate::experiment::snapshot_matrix(&traj);
        let (basis, _) = per_variable_basis(&states, 3, Truncation::Modes(3)).unwrap();
        let hd = crate::hyper::hyper_from_snapshots(&sys, &basis, &states, 5, 12).unwrap();
        write_hyper(&p, &hd).unwrap();
        let back = read_hyper(&p, &sys, &basis).unwrap();
        assert_eq!(back.sample_indices, hd.sample_indices);
        assert_eq!(back.stencil_indices, hd.stencil_indices);
        assert_eq!(back.pinv, hd.pinv);
        let other = Euler1d::new(Euler1dConfig { n_cells: 21, ..Default::default() }).unwrap();
        assert!(read_hyper(&p, &other, &basis).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matrix_roundtrip_is_bitwise(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.bin");
            let m = DMatrix::from_fn(rows, cols, |i, j| f64::from_bits(seed.rotate_left((i * 7 + j) as u32) & 0x7fef_ffff_ffff_ffff));
            write_matrix(&p, &m).unwrap();
            let back = read_matrix(&p).unwrap();
            prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.shape(), m.shape());
        }
    }
}
