//! Vertex embeddings: feature embeddings that augment raw attributes with
//! their local variation on the graph, Weisfeiler-Lehman label sequences for
//! discrete datasets, and a spectral structure embedding used for
//! neighbourhood comparison.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2};

use crate::error::{Result, RwkError};
use crate::graph::{max_laplacian_eigenvalue, normalized_laplacian, Dataset, Graph};
use crate::linalg;

/// Per-vertex features concatenated with their smoothed local variation.
#[derive(Debug, Clone)]
pub struct FeatureEmbedding {
    /// n x 2m (raw features then variation); n x m when variation is disabled.
    pub matrix: Array2<f64>,
}

/// Spectral vertex embedding with its binarized form.
#[derive(Debug, Clone)]
pub struct StructureEmbedding {
    /// n x k heat-kernel coordinates.
    pub matrix: Array2<f64>,
    /// n x k, entry 1 where the coordinate exceeds its column median.
    pub bits: Array2<u8>,
}

/// Absolute deviation of features from their `hops`-step diffusion:
/// `|X - L^hops X / lambda_max(L)|` with the normalized Laplacian `L`.
pub fn local_variation(graph: &Graph, x: &Array2<f64>, hops: usize) -> Result<Array2<f64>> {
    if x.nrows() != graph.vertex_count() {
        return Err(RwkError::Dimension(format!(
            "{} feature rows for {} vertices",
            x.nrows(),
            graph.vertex_count()
        )));
    }
    if hops == 0 {
        return Err(RwkError::Config("local variation needs at least one hop".into()));
    }
    let l = normalized_laplacian(graph);
    let lam = max_laplacian_eigenvalue(&l)?;
    let mut y = x.clone();
    for _ in 0..hops {
        y = l.dot(&y);
    }
    Ok((x - &(y / lam)).mapv(f64::abs))
}

/// Builds the transport feature embedding for one graph.
///
/// `hops = 0` disables the variation term and passes the features through.
pub fn feature_embedding(graph: &Graph, x: &Array2<f64>, hops: usize) -> Result<FeatureEmbedding> {
    if x.nrows() != graph.vertex_count() {
        return Err(RwkError::Dimension(format!(
            "{} feature rows for {} vertices",
            x.nrows(),
            graph.vertex_count()
        )));
    }
    if hops == 0 {
        return Ok(FeatureEmbedding { matrix: x.clone() });
    }
    let delta = local_variation(graph, x, hops)?;
    let (n, m) = x.dim();
    let mut out = Array2::zeros((n, 2 * m));
    out.slice_mut(s![.., ..m]).assign(x);
    out.slice_mut(s![.., m..]).assign(&delta);
    Ok(FeatureEmbedding { matrix: out })
}

/// Weisfeiler-Lehman label sequence over a whole dataset.
///
/// `labels[r][g][v]` is the round-r label of vertex `v` in graph `g`, compact
/// over a dataset-global alphabet; `alphabet_sizes[r]` is that alphabet's
/// size. Round 0 uses the stored node labels, or degrees when absent.
pub struct WlLabels {
    pub labels: Vec<Vec<Vec<usize>>>,
    pub alphabet_sizes: Vec<usize>,
}

pub fn wl_labels(dataset: &Dataset, rounds: usize) -> WlLabels {
    let has_labels = dataset.graphs.iter().all(|g| g.node_labels().is_some());

    let round0: Vec<Vec<usize>> = if has_labels {
        dataset.graphs.iter().map(|g| g.node_labels().unwrap().to_vec()).collect()
    } else {
        let mut degrees: Vec<usize> =
            dataset.graphs.iter().flat_map(|g| g.degrees().iter().copied()).collect();
        degrees.sort_unstable();
        degrees.dedup();
        dataset
            .graphs
            .iter()
            .map(|g| {
                g.degrees()
                    .iter()
                    .map(|d| degrees.binary_search(d).expect("degree in alphabet"))
                    .collect()
            })
            .collect()
    };
    let size0 = if has_labels {
        dataset.node_label_count
    } else {
        round0.iter().flatten().copied().max().map_or(0, |m| m + 1)
    };

    let mut labels = vec![round0];
    let mut alphabet_sizes = vec![size0];
    for _ in 0..rounds {
        let prev = labels.last().unwrap();
        // fresh ids assigned in first-encounter order over graphs and vertices
        let mut dict: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(dataset.graphs.len());
        for (gi, g) in dataset.graphs.iter().enumerate() {
            let mut per_graph = Vec::with_capacity(g.vertex_count());
            for v in 0..g.vertex_count() {
                let mut neigh: Vec<usize> =
                    g.neighbors(v).iter().map(|&u| prev[gi][u]).collect();
                neigh.sort_unstable();
                let key = (prev[gi][v], neigh);
                let fresh = dict.len();
                let id = *dict.entry(key).or_insert(fresh);
                per_graph.push(id);
            }
            next.push(per_graph);
        }
        alphabet_sizes.push(dict.len());
        labels.push(next);
    }
    WlLabels { labels, alphabet_sizes }
}

/// One-hot feature matrices from `rounds` label-refinement passes.
///
/// Each graph gets an `n x sum(alphabet sizes)` matrix: the concatenation of
/// one-hot blocks for rounds `0..=rounds` over dataset-global alphabets.
pub fn wl_feature_sequence(dataset: &Dataset, rounds: usize) -> Vec<Array2<f64>> {
    let wl = wl_labels(dataset, rounds);
    let width: usize = wl.alphabet_sizes.iter().sum();
    let offsets: Vec<usize> = wl
        .alphabet_sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    dataset
        .graphs
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let n = g.vertex_count();
            let mut x = Array2::zeros((n, width));
            for (r, offset) in offsets.iter().enumerate() {
                for v in 0..n {
                    x[[v, offset + wl.labels[r][gi][v]]] = 1.0;
                }
            }
            x
        })
        .collect()
}

/// Median of a column; even lengths average the two central order statistics.
fn column_median(col: &[f64]) -> f64 {
    let mut v = col.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Binarizes each column against its median: 1 where strictly above.
pub fn binarize_columns(matrix: &Array2<f64>) -> Array2<u8> {
    let (n, k) = matrix.dim();
    let mut bits = Array2::zeros((n, k));
    for d in 0..k {
        let col: Vec<f64> = matrix.column(d).to_vec();
        let med = column_median(&col);
        for i in 0..n {
            if matrix[[i, d]] > med {
                bits[[i, d]] = 1;
            }
        }
    }
    bits
}

/// Heat-kernel spectral embedding restricted to the `k` smallest Laplacian
/// eigenpairs.
///
/// Column `d` is the unit eigenvector for the d-th smallest eigenvalue scaled
/// by `exp(-t * lambda_d)`, sign-fixed so its largest-magnitude entry is
/// positive. Graphs with fewer than `k` vertices are zero-padded on the
/// right.
pub fn structure_embedding(graph: &Graph, k: usize, t: f64) -> Result<StructureEmbedding> {
    if k == 0 {
        return Err(RwkError::Config("structure embedding needs k >= 1".into()));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(RwkError::Config(format!("diffusion time {t} must be non-negative")));
    }
    let n = graph.vertex_count();
    let l = normalized_laplacian(graph);
    let eig = linalg::symmetric_eigen(&l)?;
    let mut out = Array2::zeros((n, k));
    for d in 0..k.min(n) {
        let mut col: Array1<f64> = eig.vectors.column(d).to_owned();
        let mut arg = 0;
        for i in 1..n {
            if col[i].abs() > col[arg].abs() {
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
        let w = (-t * eig.values[d]).exp();
        for i in 0..n {
            out[[i, d]] = col[i] * w;
        }
    }
    let bits = binarize_columns(&out);
    Ok(StructureEmbedding { matrix: out, bits })
}
