//! Per-graph embedding artifacts and their assembly into pair solves.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::bytes;
use crate::embed::{feature_embedding, structure_embedding, wl_feature_sequence, StructureEmbedding};
use crate::error::{Result, RwkError};
use crate::graph::{shortest_path_matrix, unnormalized_laplacian, Dataset, Graph};
use crate::similarity::{feature_similarity, neighbourhood_similarity, SimilaritySet};
use crate::solver::{prior_from_degrees, scg_solve, PairContext, SolveResult, SolverConfig};

/// Source of the per-vertex feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Use continuous vertex attributes from the dataset.
    Continuous,
    /// Build label-refinement one-hot features.
    Wl,
}

/// Intra-graph pairwise distance source for the structural cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseMode {
    ShortestPath,
    Adjacency,
    /// Hamming distances between the graph's own binarized embeddings.
    Embedding,
}

/// Options controlling how graphs are embedded before the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactOptions {
    pub feature_mode: FeatureMode,
    /// Label-refinement rounds when `feature_mode` is `Wl`.
    pub wl_rounds: usize,
    /// Diffusion hops of the local-variation term; 0 disables it.
    pub variation_hops: usize,
    /// Structure-embedding width.
    pub embed_dim: usize,
    /// Diffusion time of the spectral weights.
    pub diffusion_time: f64,
    pub pairwise: PairwiseMode,
}

impl Default for ArtifactOptions {
    fn default() -> Self {
        ArtifactOptions {
            feature_mode: FeatureMode::Wl,
            wl_rounds: 2,
            variation_hops: 2,
            embed_dim: 64,
            diffusion_time: 1.0,
            pairwise: PairwiseMode::ShortestPath,
        }
    }
}

/// Everything the solver needs about a single graph.
#[derive(Debug, Clone)]
pub struct GraphArtifacts {
    /// Feature embedding rows (attributes or one-hots, with variation).
    pub features: Array2<f64>,
    pub structure: StructureEmbedding,
    /// Intra-graph pairwise distances.
    pub pairwise: Array2<f64>,
    /// Combinatorial Laplacian.
    pub laplacian: Array2<f64>,
    pub degrees: Vec<usize>,
}

/// Feature matrices for every graph according to the configured mode.
///
/// Continuous mode passes the stored attributes through; label-refinement
/// mode builds dataset-global one-hot blocks (falling back to degree-derived
/// initial labels when the dataset has none).
pub fn prepare_features(dataset: &Dataset, opts: &ArtifactOptions) -> Result<Vec<Array2<f64>>> {
    match opts.feature_mode {
        FeatureMode::Continuous => {
            if dataset.feature_dim == 0 {
                return Err(RwkError::Config(format!(
                    "dataset {} has no continuous attributes",
                    dataset.name
                )));
            }
            Ok(dataset.graphs.iter().map(|g| g.features().clone()).collect())
        }
        FeatureMode::Wl => Ok(wl_feature_sequence(dataset, opts.wl_rounds)),
    }
}

impl GraphArtifacts {
    /// Embeds one graph. `x` is its feature matrix from [`prepare_features`].
    pub fn build(graph: &Graph, x: &Array2<f64>, opts: &ArtifactOptions) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(RwkError::Config("empty feature matrix".into()));
        }
        let features = feature_embedding(graph, x, opts.variation_hops)?.matrix;
        let structure = structure_embedding(graph, opts.embed_dim, opts.diffusion_time)?;
        let pairwise = match opts.pairwise {
            PairwiseMode::ShortestPath => shortest_path_matrix(graph),
            PairwiseMode::Adjacency => graph.adjacency().clone(),
            PairwiseMode::Embedding => {
                neighbourhood_similarity(&structure.bits, &structure.bits)?
            }
        };
        Ok(GraphArtifacts {
            features,
            structure,
            pairwise,
            laplacian: unnormalized_laplacian(graph),
            degrees: graph.degrees().to_vec(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.features.nrows()
    }
}

/// Assembles the solver context for one ordered pair of embedded graphs
/// under uniform vertex histograms.
pub fn pair_context(
    a1: &GraphArtifacts,
    a2: &GraphArtifacts,
    config: &SolverConfig,
) -> Result<PairContext> {
    let cv = feature_similarity(&a1.features, &a2.features)?;
    let cn = neighbourhood_similarity(&a1.structure.bits, &a2.structure.bits)?;
    let sim = SimilaritySet {
        cv,
        cn,
        cp_source: a1.pairwise.clone(),
        cp_target: a2.pairwise.clone(),
    };
    let prior = prior_from_degrees(&a1.degrees, &a2.degrees, config.log_floor);
    let n1 = a1.vertex_count();
    let n2 = a2.vertex_count();
    let mu = Array1::from_elem(n1, 1.0 / n1 as f64);
    let nu = Array1::from_elem(n2, 1.0 / n2 as f64);
    PairContext::new(
        sim,
        a1.laplacian.clone(),
        a2.laplacian.clone(),
        &a1.structure.matrix,
        &a2.structure.matrix,
        prior,
        mu,
        nu,
        config.clone(),
    )
}

/// Full pair discrepancy: embeds both graphs (using their stored feature
/// matrices) and minimizes the transport objective between them.
pub fn rw_discrepancy(
    g1: &Graph,
    g2: &Graph,
    opts: &ArtifactOptions,
    config: &SolverConfig,
) -> Result<(f64, SolveResult)> {
    let a1 = GraphArtifacts::build(g1, g1.features(), opts)?;
    let a2 = GraphArtifacts::build(g2, g2.features(), opts)?;
    let ctx = pair_context(&a1, &a2, config)?;
    let result = scg_solve(&ctx)?;
    Ok((result.rw_value, result))
}

const CACHE_MAGIC: &str = "RWKEMB1";

/// Persists embedded artifacts with the configuration hash they derive from.
pub fn save_artifacts(path: &Path, hash: &str, artifacts: &[GraphArtifacts]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    use std::io::Write;
    write!(w, "{CACHE_MAGIC}\n{hash}\n{}\n", artifacts.len()).map_err(RwkError::Io)?;
    for a in artifacts {
        let n = a.vertex_count() as u64;
        bytes::write_u64(&mut w, n)?;
        bytes::write_u64(&mut w, a.features.ncols() as u64)?;
        bytes::write_u64(&mut w, a.structure.matrix.ncols() as u64)?;
        bytes::write_f64s(&mut w, a.features.iter().cloned())?;
        bytes::write_f64s(&mut w, a.structure.matrix.iter().cloned())?;
        let bits: Vec<u8> = a.structure.bits.iter().cloned().collect();
        bytes::write_bytes(&mut w, &bits)?;
        bytes::write_f64s(&mut w, a.pairwise.iter().cloned())?;
        bytes::write_f64s(&mut w, a.laplacian.iter().cloned())?;
        for &d in &a.degrees {
            bytes::write_u64(&mut w, d as u64)?;
        }
    }
    Ok(())
}

/// Loads cached artifacts if the stored hash matches; `Ok(None)` on a hash
/// mismatch so callers can rebuild.
pub fn load_artifacts(path: &Path, expected_hash: &str) -> Result<Option<Vec<GraphArtifacts>>> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let magic = bytes::read_header_line(&mut r, 64)?;
    if magic != CACHE_MAGIC {
        return Err(RwkError::Format(format!("unexpected cache magic {magic:?}")));
    }
    let hash = bytes::read_header_line(&mut r, 256)?;
    if hash != expected_hash {
        return Ok(None);
    }
    let count: usize = bytes::read_header_line(&mut r, 32)?
        .parse()
        .map_err(|_| RwkError::Format("bad artifact count".into()))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n = bytes::read_u64(&mut r)? as usize;
        let fc = bytes::read_u64(&mut r)? as usize;
        let k = bytes::read_u64(&mut r)? as usize;
        let features = Array2::from_shape_vec((n, fc), bytes::read_f64s(&mut r, n * fc)?)
            .map_err(|e| RwkError::Format(e.to_string()))?;
        let matrix = Array2::from_shape_vec((n, k), bytes::read_f64s(&mut r, n * k)?)
            .map_err(|e| RwkError::Format(e.to_string()))?;
        let bits = Array2::from_shape_vec((n, k), bytes::read_bytes(&mut r, n * k)?)
            .map_err(|e| RwkError::Format(e.to_string()))?;
        let pairwise = Array2::from_shape_vec((n, n), bytes::read_f64s(&mut r, n * n)?)
            .map_err(|e| RwkError::Format(e.to_string()))?;
        let laplacian = Array2::from_shape_vec((n, n), bytes::read_f64s(&mut r, n * n)?)
            .map_err(|e| RwkError::Format(e.to_string()))?;
        let mut degrees = Vec::with_capacity(n);
        for _ in 0..n {
            degrees.push(bytes::read_u64(&mut r)? as usize);
        }
        out.push(GraphArtifacts {
            features,
            structure: StructureEmbedding { matrix, bits },
            pairwise,
            laplacian,
            degrees,
        });
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> Dataset {
        Dataset {
            name: "toy".into(),
            graphs: vec![
                Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap(),
                Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(),
            ],
            labels: vec![0, 1],
            class_count: 2,
            node_label_count: 0,
            feature_dim: 0,
        }
    }

    #[test]
    fn artifacts_have_consistent_shapes() {
        let ds = toy_dataset();
        let opts = ArtifactOptions { embed_dim: 8, ..Default::default() };
        let feats = prepare_features(&ds, &opts).unwrap();
        let a = GraphArtifacts::build(&ds.graphs[0], &feats[0], &opts).unwrap();
        assert_eq!(a.vertex_count(), 3);
        assert_eq!(a.structure.matrix.ncols(), 8);
        assert_eq!(a.pairwise.dim(), (3, 3));
        assert_eq!(a.features.ncols(), 2 * feats[0].ncols());
    }

    #[test]
    fn continuous_mode_requires_attributes() {
        let ds = toy_dataset();
        let opts = ArtifactOptions {
            feature_mode: FeatureMode::Continuous,
            ..Default::default()
        };
        assert!(prepare_features(&ds, &opts).is_err());
    }

    #[test]
    fn discrepancy_is_symmetric_and_zero_friendly() {
        let ds = toy_dataset();
        let opts = ArtifactOptions { embed_dim: 8, ..Default::default() };
        let feats = prepare_features(&ds, &opts).unwrap();
        let mut g1 = ds.graphs[0].clone();
        let mut g2 = ds.graphs[1].clone();
        g1.set_features(feats[0].clone()).unwrap();
        g2.set_features(feats[1].clone()).unwrap();
        let cfg = SolverConfig::default();
        let (v12, r12) = rw_discrepancy(&g1, &g2, &opts, &cfg).unwrap();
        let (v21, _) = rw_discrepancy(&g2, &g1, &opts, &cfg).unwrap();
        assert!((v12 - v21).abs() <= 1e-3, "asymmetry {v12} vs {v21}");
        assert!((r12.rw_value - r12.objective).abs() < 1e-9);
        assert!(r12.coupling.matrix.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn artifact_cache_roundtrip() {
        let ds = toy_dataset();
        let opts = ArtifactOptions { embed_dim: 4, ..Default::default() };
        let feats = prepare_features(&ds, &opts).unwrap();
        let arts: Vec<GraphArtifacts> = ds
            .graphs
            .iter()
            .zip(feats.iter())
            .map(|(g, x)| GraphArtifacts::build(g, x, &opts).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        save_artifacts(&path, "abc123", &arts).unwrap();
        let loaded = load_artifacts(&path, "abc123").unwrap().unwrap();
        assert_eq!(loaded.len(), arts.len());
        for (a, b) in arts.iter().zip(loaded.iter()) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.structure.matrix, b.structure.matrix);
            assert_eq!(a.structure.bits, b.structure.bits);
            assert_eq!(a.pairwise, b.pairwise);
            assert_eq!(a.laplacian, b.laplacian);
            assert_eq!(a.degrees, b.degrees);
        }
        // stale hash refuses to load
        assert!(load_artifacts(&path, "other").unwrap().is_none());
    }
}
