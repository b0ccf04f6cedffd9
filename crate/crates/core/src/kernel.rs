//! Kernel matrix assembly from pair discrepancies, positive-semidefinite
//! repair, and the on-disk Gram format.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::bytes;
use crate::error::{Result, RwkError};
use crate::linalg;
use crate::pipeline::{pair_context, GraphArtifacts};
use crate::solver::{scg_solve, SolverConfig};

/// Symmetric kernel matrix over a dataset.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub dataset: String,
    pub config_hash: String,
    pub repaired: bool,
}

/// Spectrum surgery applied to an indefinite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairMode {
    /// Negative eigenvalues set to zero.
    Clip,
    /// Eigenvalues replaced by their absolute values.
    Flip,
    /// Spectrum shifted up by the most negative eigenvalue.
    Shift,
}

impl RepairMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RepairMode::Clip => "clip",
            RepairMode::Flip => "flip",
            RepairMode::Shift => "shift",
        }
    }
}

impl FromStr for RepairMode {
    type Err = RwkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(RepairMode::Clip),
            "flip" => Ok(RepairMode::Flip),
            "shift" => Ok(RepairMode::Shift),
            other => Err(RwkError::Config(format!(
                "unknown repair mode {other:?} (expected clip, flip, or shift)"
            ))),
        }
    }
}

/// Per-pair solve diagnostics, ordered by (p, q) upper-triangle position.
#[derive(Debug, Clone, Copy)]
pub struct PairRecord {
    pub p: usize,
    pub q: usize,
    pub discrepancy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_gap: f64,
}

/// Aggregate timing and convergence diagnostics of one assembly run.
#[derive(Debug, Clone)]
pub struct GramStats {
    pub pairs: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
    /// Pairs whose solver hit the gap test before the iteration budget.
    pub converged: usize,
    /// Most negative raw discrepancy observed (negatives are floored to 0
    /// before exponentiation).
    pub min_discrepancy: f64,
    pub records: Vec<PairRecord>,
}

/// Assembles `K[p][q] = exp(-eta * d(p, q))` over all graph pairs.
///
/// Only the upper triangle is solved; the matrix is mirrored so it is
/// symmetric by construction. Discrepancies are floored at zero, keeping all
/// entries in (0, 1]. The result is identical regardless of worker count.
pub fn gram_matrix(
    artifacts: &[GraphArtifacts],
    solver: &SolverConfig,
    eta: f64,
    dataset: &str,
    config_hash: &str,
) -> Result<(GramMatrix, GramStats)> {
    if artifacts.is_empty() {
        return Err(RwkError::Config("no graphs to compare".into()));
    }
    if eta <= 0.0 || !eta.is_finite() {
        return Err(RwkError::Config(format!("eta = {eta} must be positive")));
    }
    let g = artifacts.len();
    let pair_indices: Vec<(usize, usize)> = (0..g)
        .flat_map(|p| (p..g).map(move |q| (p, q)))
        .collect();

    let solved: Vec<(PairRecord, f64)> = pair_indices
        .par_iter()
        .map(|&(p, q)| -> Result<(PairRecord, f64)> {
            let start = Instant::now();
            let ctx = pair_context(&artifacts[p], &artifacts[q], solver)?;
            let res = scg_solve(&ctx)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let record = PairRecord {
                p,
                q,
                discrepancy: res.rw_value,
                iterations: res.iterations,
                converged: res.converged,
                final_gap: res.gap_history.last().copied().unwrap_or(0.0),
            };
            Ok((record, ms))
        })
        .collect::<Result<_>>()?;

    let mut values = Array2::zeros((g, g));
    let mut converged = 0usize;
    let mut min_rw = f64::INFINITY;
    let mut total_ms = 0.0f64;
    let mut max_ms = 0.0f64;
    for &(rec, ms) in &solved {
        min_rw = min_rw.min(rec.discrepancy);
        let entry = (-eta * rec.discrepancy.max(0.0)).exp();
        values[[rec.p, rec.q]] = entry;
        values[[rec.q, rec.p]] = entry;
        if rec.converged {
            converged += 1;
        }
        total_ms += ms;
        max_ms = max_ms.max(ms);
    }
    let stats = GramStats {
        pairs: solved.len(),
        mean_ms: total_ms / solved.len() as f64,
        max_ms,
        converged,
        min_discrepancy: min_rw,
        records: solved.iter().map(|&(rec, _)| rec).collect(),
    };
    let gram = GramMatrix {
        values,
        dataset: dataset.to_string(),
        config_hash: config_hash.to_string(),
        repaired: false,
    };
    Ok((gram, stats))
}

/// What a repair did to the spectrum.
#[derive(Debug, Clone, Copy)]
pub struct RepairReport {
    pub min_eigenvalue_before: f64,
    pub min_eigenvalue_after: f64,
    pub changed: bool,
}

/// Eigenvalues above this are treated as non-negative.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Enforces positive semidefiniteness by eigenvalue surgery.
///
/// The input is symmetrized first; a matrix whose smallest eigenvalue is
/// already within [`PSD_TOLERANCE`] of non-negative is passed through
/// unchanged, which makes every mode idempotent.
pub fn psd_repair(gram: &GramMatrix, mode: RepairMode) -> Result<(GramMatrix, RepairReport)> {
    let sym = 0.5 * (&gram.values + &gram.values.t());
    let eig = linalg::symmetric_eigen(&sym)?;
    let min_before = eig.values[0];
    if min_before >= -PSD_TOLERANCE {
        return Ok((
            GramMatrix { repaired: true, ..gram.clone() },
            RepairReport {
                min_eigenvalue_before: min_before,
                min_eigenvalue_after: min_before,
                changed: false,
            },
        ));
    }
    let new_values: Vec<f64> = match mode {
        RepairMode::Clip => eig.values.iter().map(|&v| v.max(0.0)).collect(),
        RepairMode::Flip => eig.values.iter().map(|&v| v.abs()).collect(),
        RepairMode::Shift => eig.values.iter().map(|&v| v - min_before).collect(),
    };
    let lam = Array2::from_diag(&ndarray::Array1::from_vec(new_values));
    let rebuilt = eig.vectors.dot(&lam).dot(&eig.vectors.t());
    let rebuilt = 0.5 * (&rebuilt + &rebuilt.t());
    let min_after = linalg::symmetric_eigen(&rebuilt)?.values[0];
    Ok((
        GramMatrix {
            values: rebuilt,
            dataset: gram.dataset.clone(),
            config_hash: gram.config_hash.clone(),
            repaired: true,
        },
        RepairReport {
            min_eigenvalue_before: min_before,
            min_eigenvalue_after: min_after,
            changed: true,
        },
    ))
}

/// Structural checks on an assembled (unrepaired) kernel: symmetry within
/// 1e-8, finite entries in (0, 1].
pub fn validate_gram(gram: &GramMatrix) -> Result<()> {
    let v = &gram.values;
    if v.nrows() != v.ncols() {
        return Err(RwkError::Dimension(format!(
            "kernel matrix is {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    if linalg::asymmetry(v) > 1e-8 {
        return Err(RwkError::Integrity("kernel matrix is asymmetric beyond 1e-8".into()));
    }
    for &x in v.iter() {
        if !x.is_finite() || x <= 0.0 || x > 1.0 {
            return Err(RwkError::Integrity(format!(
                "kernel entry {x} outside (0, 1]"
            )));
        }
    }
    Ok(())
}

const GRAM_MAGIC: &str = "RWKGRAM1";

/// Writes the Gram file: a text header (magic, size, dataset, configuration
/// hash, repaired flag) followed by row-major little-endian f64 values.
pub fn save_gram(path: &Path, gram: &GramMatrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(
        w,
        "{GRAM_MAGIC}\n{}\n{}\n{}\n{}\n",
        gram.values.nrows(),
        gram.dataset,
        gram.config_hash,
        u8::from(gram.repaired)
    )
    .map_err(RwkError::Io)?;
    bytes::write_f64s(&mut w, gram.values.iter().cloned())?;
    Ok(())
}

pub fn load_gram(path: &Path) -> Result<GramMatrix> {
    let file = fs::File::open(path).map_err(|e| RwkError::Ingestion {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut r = BufReader::new(file);
    let magic = bytes::read_header_line(&mut r, 64)?;
    if magic != GRAM_MAGIC {
        return Err(RwkError::Format(format!(
            "not a Gram file (magic {magic:?}, expected {GRAM_MAGIC:?})"
        )));
    }
    let g: usize = bytes::read_header_line(&mut r, 32)?
        .parse()
        .map_err(|_| RwkError::Format("bad matrix size in header".into()))?;
    let dataset = bytes::read_header_line(&mut r, 256)?;
    let config_hash = bytes::read_header_line(&mut r, 256)?;
    let repaired = match bytes::read_header_line(&mut r, 8)?.as_str() {
        "0" => false,
        "1" => true,
        other => {
            return Err(RwkError::Format(format!("bad repaired flag {other:?}")));
        }
    };
    let data = bytes::read_f64s(&mut r, g * g)?;
    let values =
        Array2::from_shape_vec((g, g), data).map_err(|e| RwkError::Format(e.to_string()))?;
    Ok(GramMatrix { values, dataset, config_hash, repaired })
}

/// Plain-text export: a header row of graph indices, then one row per graph
/// with 17 significant digits.
pub fn export_gram_csv(path: &Path, gram: &GramMatrix) -> Result<()> {
    let g = gram.values.nrows();
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..g).map(|i| i.to_string()).collect();
    writeln!(w, "{}", header.join(",")).map_err(RwkError::Io)?;
    for i in 0..g {
        let row: Vec<String> = (0..g).map(|j| format!("{:.16e}", gram.values[[i, j]])).collect();
        writeln!(w, "{}", row.join(",")).map_err(RwkError::Io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_gram(values: Array2<f64>) -> GramMatrix {
        GramMatrix {
            values,
            dataset: "toy".into(),
            config_hash: "cafebabe".into(),
            repaired: false,
        }
    }

    #[test]
    fn clip_removes_negative_spectrum() {
        // eigenvalues 3 and -1
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        let (rep, report) = psd_repair(&toy_gram(m), RepairMode::Clip).unwrap();
        assert!(report.changed);
        assert!((report.min_eigenvalue_before + 1.0).abs() < 1e-10);
        assert!(report.min_eigenvalue_after >= -1e-10);
        // clip keeps the projection onto the positive eigenspace: 3/2 * vv^T
        for &v in rep.values.iter() {
            assert!((v - 1.5).abs() < 1e-10);
        }
    }

    #[test]
    fn flip_and_shift_agree_with_hand_spectra() {
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        let (flip, _) = psd_repair(&toy_gram(m.clone()), RepairMode::Flip).unwrap();
        // flip: |3|, |-1| -> diag entries 2, off-diag 1
        assert!((flip.values[[0, 0]] - 2.0).abs() < 1e-10);
        assert!((flip.values[[0, 1]] - 1.0).abs() < 1e-10);
        let (shift, _) = psd_repair(&toy_gram(m), RepairMode::Shift).unwrap();
        // shift adds 1 to both eigenvalues: diagonal 2, off-diagonal 2
        assert!((shift.values[[0, 0]] - 2.0).abs() < 1e-10);
        assert!((shift.values[[0, 1]] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn psd_input_passes_through() {
        let m = array![[2.0, 0.5], [0.5, 2.0]];
        let (rep, report) = psd_repair(&toy_gram(m.clone()), RepairMode::Clip).unwrap();
        assert!(!report.changed);
        assert_eq!(rep.values, m);
        assert!(rep.repaired);
    }

    #[test]
    fn repair_is_idempotent() {
        let m = array![[1.0, 2.0, 0.1], [2.0, 1.0, -0.3], [0.1, -0.3, 0.7]];
        for mode in [RepairMode::Clip, RepairMode::Flip, RepairMode::Shift] {
            let (once, _) = psd_repair(&toy_gram(m.clone()), mode).unwrap();
            let (twice, report) = psd_repair(&once, mode).unwrap();
            assert!(!report.changed, "{mode:?} repaired matrix was repaired again");
            assert_eq!(once.values, twice.values);
        }
    }

    #[test]
    fn gram_file_roundtrip_is_exact() {
        let m = array![[1.0, 0.5], [0.5, 1.0]];
        let g = GramMatrix {
            values: m,
            dataset: "toy".into(),
            config_hash: "deadbeef".into(),
            repaired: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.gram");
        save_gram(&path, &g).unwrap();
        let back = load_gram(&path).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!(back.dataset, "toy");
        assert_eq!(back.config_hash, "deadbeef");
        assert!(back.repaired);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gram");
        fs::write(&path, b"NOTAGRAM\n2\nx\ny\n0\n").unwrap();
        assert!(matches!(load_gram(&path), Err(RwkError::Format(_))));
    }

    #[test]
    fn validation_catches_out_of_range_entries() {
        let ok = toy_gram(array![[1.0, 0.3], [0.3, 1.0]]);
        assert!(validate_gram(&ok).is_ok());
        let bad = toy_gram(array![[1.0, 1.5], [1.5, 1.0]]);
        assert!(validate_gram(&bad).is_err());
        let zero = toy_gram(array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(validate_gram(&zero).is_err());
    }
}
