//! Pairwise cost matrices between two graphs: feature distances, binarized
//! structure distances, and the quadratic structural cost applied to a
//! coupling without materializing the fourth-order tensor.

use ndarray::{Array1, Array2};

use crate::error::{Result, RwkError};

/// Cost matrices consumed by the transport solver for one graph pair.
#[derive(Debug, Clone)]
pub struct SimilaritySet {
    /// n1 x n2 feature distances.
    pub cv: Array2<f64>,
    /// n1 x n2 normalized hamming distances between structure bits.
    pub cn: Array2<f64>,
    /// n1 x n1 intra-graph pairwise distances of the source graph.
    pub cp_source: Array2<f64>,
    /// n2 x n2 intra-graph pairwise distances of the target graph.
    pub cp_target: Array2<f64>,
}

/// Euclidean distances between embedding rows: `cv[i][j] = |a_i - b_j|_2`.
pub fn feature_similarity(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(RwkError::Dimension(format!(
            "feature embeddings have widths {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut cv = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let mut acc = 0.0;
            for c in 0..a.ncols() {
                let d = a[[i, c]] - b[[j, c]];
                acc += d * d;
            }
            cv[[i, j]] = acc.sqrt();
        }
    }
    Ok(cv)
}

/// Hamming distances between binarized structure embeddings, divided by the
/// embedding width so values lie in [0, 1].
pub fn neighbourhood_similarity(a: &Array2<u8>, b: &Array2<u8>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(RwkError::Dimension(format!(
            "structure embeddings have widths {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let k = a.ncols();
    if k == 0 {
        return Err(RwkError::Dimension("structure embeddings are empty".into()));
    }
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut cn = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let mut diff = 0usize;
            for c in 0..k {
                if a[[i, c]] != b[[j, c]] {
                    diff += 1;
                }
            }
            cn[[i, j]] = diff as f64 / k as f64;
        }
    }
    Ok(cn)
}

/// Applies the squared-difference structural cost to a coupling:
///
/// `out[i][k] = sum_{j,l} (cp1[i][j] - cp2[k][l])^2 / 2 * gamma[j][l]`
///
/// evaluated through marginal and cross-product terms in O(N^3). The
/// marginals come from the given matrix itself, so the identity holds for
/// arbitrary `gamma`, feasible or not.
pub fn gw_cost_apply(cp1: &Array2<f64>, cp2: &Array2<f64>, gamma: &Array2<f64>) -> Result<Array2<f64>> {
    let (n1, n2) = gamma.dim();
    if cp1.nrows() != n1 || cp1.ncols() != n1 {
        return Err(RwkError::Dimension(format!(
            "source pairwise matrix is {}x{}, coupling has {} rows",
            cp1.nrows(),
            cp1.ncols(),
            n1
        )));
    }
    if cp2.nrows() != n2 || cp2.ncols() != n2 {
        return Err(RwkError::Dimension(format!(
            "target pairwise matrix is {}x{}, coupling has {} columns",
            cp2.nrows(),
            cp2.ncols(),
            n2
        )));
    }
    let row_sums: Array1<f64> = gamma.sum_axis(ndarray::Axis(1));
    let col_sums: Array1<f64> = gamma.sum_axis(ndarray::Axis(0));
    let cp1_sq_r = cp1.mapv(|v| v * v).dot(&row_sums);
    let cp2_sq_c = cp2.mapv(|v| v * v).dot(&col_sums);
    let cross = cp1.dot(gamma).dot(&cp2.t());
    let mut out = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for k in 0..n2 {
            out[[i, k]] = 0.5 * (cp1_sq_r[i] + cp2_sq_c[k]) - cross[[i, k]];
        }
    }
    Ok(out)
}
