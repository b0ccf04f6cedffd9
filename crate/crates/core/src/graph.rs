//! Attributed graphs, probability histograms over their vertices, and the
//! standard benchmark text layout they are loaded from.
//!
//! A dataset directory holds `<name>_A.txt` (comma-separated 1-based edge
//! pairs), `<name>_graph_indicator.txt` (graph id per vertex line),
//! `<name>_graph_labels.txt`, and optionally `<name>_node_labels.txt` and
//! `<name>_node_attributes.txt`.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Result, RwkError};
use crate::linalg;

/// Undirected attributed graph.
///
/// Adjacency is dense 0/1, symmetric, zero diagonal. `features` may have zero
/// columns when the dataset carries discrete labels only; `node_labels` holds
/// dictionary-compacted label ids in that case.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Array2<f64>,
    features: Array2<f64>,
    node_labels: Option<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    pub fn new(
        adjacency: Array2<f64>,
        features: Array2<f64>,
        node_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(RwkError::Integrity("graph must have at least one vertex".into()));
        }
        if adjacency.ncols() != n {
            return Err(RwkError::Dimension(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(RwkError::Integrity(format!("self-loop at vertex {i}")));
            }
            for j in 0..n {
                let a = adjacency[[i, j]];
                if a != 0.0 && a != 1.0 {
                    return Err(RwkError::Integrity(format!(
                        "adjacency entry ({i},{j}) = {a}, expected 0 or 1"
                    )));
                }
                if a != adjacency[[j, i]] {
                    return Err(RwkError::Integrity(format!(
                        "adjacency asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        if features.nrows() != n && !(features.nrows() == 0 && features.ncols() == 0) {
            return Err(RwkError::Dimension(format!(
                "feature matrix has {} rows for {} vertices",
                features.nrows(),
                n
            )));
        }
        if let Some(labels) = &node_labels {
            if labels.len() != n {
                return Err(RwkError::Dimension(format!(
                    "{} node labels for {} vertices",
                    labels.len(),
                    n
                )));
            }
        }
        let features = if features.nrows() == 0 {
            Array2::zeros((n, 0))
        } else {
            features
        };
        let degrees = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[[i, j]] != 0.0).count())
            .collect();
        Ok(Self { adjacency, features, node_labels, degrees })
    }

    /// Builds an unlabeled, featureless graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Array2::zeros((n, n));
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(RwkError::Integrity(format!(
                    "edge ({a},{b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(RwkError::Integrity(format!("self-loop at vertex {a}")));
            }
            adj[[a, b]] = 1.0;
            adj[[b, a]] = 1.0;
        }
        Self::new(adj, Array2::zeros((n, 0)), None)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn set_features(&mut self, features: Array2<f64>) -> Result<()> {
        if features.nrows() != self.vertex_count() {
            return Err(RwkError::Dimension(format!(
                "feature matrix has {} rows for {} vertices",
                features.nrows(),
                self.vertex_count()
            )));
        }
        self.features = features;
        Ok(())
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&u| self.adjacency[[v, u]] != 0.0)
            .collect()
    }

    pub fn uniform_histogram(&self) -> Histogram {
        Histogram::uniform(self.vertex_count())
    }
}

/// Probability weights over the vertices of one graph.
#[derive(Debug, Clone)]
pub struct Histogram(Array1<f64>);

impl Histogram {
    pub fn uniform(n: usize) -> Self {
        Histogram(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RwkError::Dimension("histogram must be non-empty".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(RwkError::Integrity("histogram weights must be non-negative".into()));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(RwkError::Integrity(format!(
                "histogram mass {total} differs from 1 beyond 1e-12"
            )));
        }
        Ok(Histogram(weights))
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|&w| (w - u).abs() <= 1e-12)
    }
}

/// A named collection of graphs with class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Class index per graph, 0-based and contiguous.
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Size of the discrete node-label alphabet; 0 when labels are absent.
    pub node_label_count: usize,
    /// Width of continuous vertex attributes; 0 when absent.
    pub feature_dim: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| RwkError::Ingestion {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn parse_int(s: &str, path: &Path, line: usize) -> Result<i64> {
    s.trim().parse::<i64>().map_err(|_| RwkError::Ingestion {
        path: path.display().to_string(),
        reason: format!("line {}: expected integer, got {:?}", line + 1, s),
    })
}

fn parse_float(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| RwkError::Ingestion {
        path: path.display().to_string(),
        reason: format!("line {}: expected number, got {:?}", line + 1, s),
    })
}

/// Maps raw integer labels to contiguous 0-based ids, sorted ascending.
fn compact_labels(raw: &[i64]) -> (Vec<usize>, usize) {
    let mut alphabet: Vec<i64> = raw.to_vec();
    alphabet.sort_unstable();
    alphabet.dedup();
    let compact = raw
        .iter()
        .map(|v| alphabet.binary_search(v).expect("label in alphabet"))
        .collect();
    (compact, alphabet.len())
}

/// Loads a dataset from `dir` in the benchmark text layout.
pub fn load_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(RwkError::Ingestion {
            path: dir.display().to_string(),
            reason: "not a directory".into(),
        });
    }
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let ind_path = file("graph_indicator");
    let ind_lines = read_lines(&ind_path)?;
    let n_total = ind_lines.len();
    let mut graph_of: Vec<usize> = Vec::with_capacity(n_total);
    for (i, l) in ind_lines.iter().enumerate() {
        let g = parse_int(l, &ind_path, i)?;
        if g < 1 {
            return Err(RwkError::Integrity(format!(
                "graph indicator {g} on line {} is not positive",
                i + 1
            )));
        }
        graph_of.push((g - 1) as usize);
    }
    let graph_count = match graph_of.iter().max() {
        Some(&m) => m + 1,
        None => {
            return Err(RwkError::Ingestion {
                path: ind_path.display().to_string(),
                reason: "no vertices listed".into(),
            })
        }
    };

    // vertices of each graph keep their file order; ids must be contiguous
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graph_count];
    for (v, &g) in graph_of.iter().enumerate() {
        members[g].push(v);
    }
    if let Some(empty) = members.iter().position(|m| m.is_empty()) {
        return Err(RwkError::Integrity(format!("graph {} has no vertices", empty + 1)));
    }
    let mut local_of: Vec<usize> = vec![0; n_total];
    for m in &members {
        for (k, &v) in m.iter().enumerate() {
            local_of[v] = k;
        }
    }

    let a_path = file("A");
    let mut adjacencies: Vec<Array2<f64>> = members
        .iter()
        .map(|m| Array2::zeros((m.len(), m.len())))
        .collect();
    for (i, l) in read_lines(&a_path)?.iter().enumerate() {
        let mut parts = l.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(RwkError::Ingestion {
                    path: a_path.display().to_string(),
                    reason: format!("line {}: expected \"src, dst\", got {:?}", i + 1, l),
                })
            }
        };
        let a = parse_int(a, &a_path, i)?;
        let b = parse_int(b, &a_path, i)?;
        if a < 1 || b < 1 || a as usize > n_total || b as usize > n_total {
            return Err(RwkError::Integrity(format!(
                "edge ({a}, {b}) references a vertex outside 1..={n_total}"
            )));
        }
        let (a, b) = ((a - 1) as usize, (b - 1) as usize);
        if graph_of[a] != graph_of[b] {
            return Err(RwkError::Integrity(format!(
                "edge ({}, {}) crosses graphs {} and {}",
                a + 1,
                b + 1,
                graph_of[a] + 1,
                graph_of[b] + 1
            )));
        }
        if a == b {
            return Err(RwkError::Integrity(format!("self-loop at vertex {}", a + 1)));
        }
        let g = graph_of[a];
        adjacencies[g][[local_of[a], local_of[b]]] = 1.0;
        adjacencies[g][[local_of[b], local_of[a]]] = 1.0;
    }

    let gl_path = file("graph_labels");
    let gl_lines = read_lines(&gl_path)?;
    if gl_lines.len() != graph_count {
        return Err(RwkError::Integrity(format!(
            "{} graph labels for {} graphs",
            gl_lines.len(),
            graph_count
        )));
    }
    let raw_graph_labels: Vec<i64> = gl_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(l, &gl_path, i))
        .collect::<Result<_>>()?;
    let (labels, class_count) = compact_labels(&raw_graph_labels);

    let nl_path = file("node_labels");
    let (node_labels, node_label_count) = if nl_path.is_file() {
        let lines = read_lines(&nl_path)?;
        if lines.len() != n_total {
            return Err(RwkError::Integrity(format!(
                "{} node labels for {} vertices",
                lines.len(),
                n_total
            )));
        }
        let raw: Vec<i64> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| parse_int(l, &nl_path, i))
            .collect::<Result<_>>()?;
        let (compact, alphabet) = compact_labels(&raw);
        (Some(compact), alphabet)
    } else {
        (None, 0)
    };

    let na_path = file("node_attributes");
    let (attributes, feature_dim) = if na_path.is_file() {
        let lines = read_lines(&na_path)?;
        if lines.len() != n_total {
            return Err(RwkError::Integrity(format!(
                "{} attribute rows for {} vertices",
                lines.len(),
                n_total
            )));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_total);
        for (i, l) in lines.iter().enumerate() {
            let row: Vec<f64> = l
                .split(',')
                .map(|s| parse_float(s, &na_path, i))
                .collect::<Result<_>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(RwkError::Ingestion {
                        path: na_path.display().to_string(),
                        reason: format!(
                            "line {}: {} attributes, expected {}",
                            i + 1,
                            row.len(),
                            first.len()
                        ),
                    });
                }
            }
            rows.push(row);
        }
        let dim = rows.first().map_or(0, |r| r.len());
        (Some(rows), dim)
    } else {
        (None, 0)
    };

    let mut graphs = Vec::with_capacity(graph_count);
    for (g, m) in members.iter().enumerate() {
        let n = m.len();
        let features = match &attributes {
            Some(rows) => {
                let mut x = Array2::zeros((n, feature_dim));
                for (k, &v) in m.iter().enumerate() {
                    for (c, &val) in rows[v].iter().enumerate() {
                        x[[k, c]] = val;
                    }
                }
                x
            }
            None => Array2::zeros((n, 0)),
        };
        let labels_g = node_labels
            .as_ref()
            .map(|all| m.iter().map(|&v| all[v]).collect());
        graphs.push(Graph::new(adjacencies[g].clone(), features, labels_g)?);
    }

    Ok(Dataset {
        name: name.to_string(),
        graphs,
        labels,
        class_count,
        node_label_count,
        feature_dim,
    })
}

/// Writes a dataset back out in the benchmark text layout.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = &dataset.name;
    let mut a = String::new();
    let mut ind = String::new();
    let mut nl = String::new();
    let mut na = String::new();
    let mut offset = 0usize;
    let has_labels = dataset.graphs.iter().all(|g| g.node_labels().is_some());
    let has_attrs = dataset.feature_dim > 0;
    for (gi, g) in dataset.graphs.iter().enumerate() {
        let n = g.vertex_count();
        for v in 0..n {
            ind.push_str(&format!("{}\n", gi + 1));
            if has_labels {
                nl.push_str(&format!("{}\n", g.node_labels().unwrap()[v]));
            }
            if has_attrs {
                let row: Vec<String> =
                    (0..dataset.feature_dim).map(|c| format!("{}", g.features()[[v, c]])).collect();
                na.push_str(&row.join(", "));
                na.push('\n');
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && g.adjacency()[[i, j]] != 0.0 {
                    a.push_str(&format!("{}, {}\n", offset + i + 1, offset + j + 1));
                }
            }
        }
        offset += n;
    }
    let mut gl = String::new();
    for &l in &dataset.labels {
        gl.push_str(&format!("{l}\n"));
    }
    fs::write(dir.join(format!("{name}_A.txt")), a)?;
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), ind)?;
    fs::write(dir.join(format!("{name}_graph_labels.txt")), gl)?;
    if has_labels {
        fs::write(dir.join(format!("{name}_node_labels.txt")), nl)?;
    }
    if has_attrs {
        fs::write(dir.join(format!("{name}_node_attributes.txt")), na)?;
    }
    Ok(())
}

/// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}`.
///
/// Rows and columns of isolated vertices equal the identity row.
pub fn normalized_laplacian(graph: &Graph) -> Array2<f64> {
    let n = graph.vertex_count();
    let inv_sqrt: Vec<f64> = graph
        .degrees()
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut l = Array2::eye(n);
    for i in 0..n {
        for j in 0..n {
            if graph.adjacency()[[i, j]] != 0.0 {
                l[[i, j]] -= inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    l
}

/// Combinatorial Laplacian `D - A`.
pub fn unnormalized_laplacian(graph: &Graph) -> Array2<f64> {
    let n = graph.vertex_count();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        l[[i, i]] = graph.degrees()[i] as f64;
        for j in 0..n {
            if graph.adjacency()[[i, j]] != 0.0 {
                l[[i, j]] -= 1.0;
            }
        }
    }
    l
}

/// Largest eigenvalue of a Laplacian; the all-zero matrix maps to 1 so it can
/// be used as a divisor unconditionally.
pub fn max_laplacian_eigenvalue(l: &Array2<f64>) -> Result<f64> {
    if l.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    linalg::max_eigenvalue(l)
}

/// All-pairs hop distances scaled into [0, 1].
///
/// Unreachable pairs are set to one plus the diameter of the largest
/// component (largest by vertex count, ties resolved toward the larger
/// diameter) before the matrix is divided by its maximum entry.
pub fn shortest_path_matrix(graph: &Graph) -> Array2<f64> {
    let n = graph.vertex_count();
    let mut dist = vec![vec![usize::MAX; n]; n];
    for s in 0..n {
        dist[s][s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for u in 0..n {
                if graph.adjacency()[[v, u]] != 0.0 && dist[s][u] == usize::MAX {
                    dist[s][u] = dist[s][v] + 1;
                    q.push_back(u);
                }
            }
        }
    }

    // component id per vertex via the computed reachability
    let mut comp = vec![usize::MAX; n];
    let mut comp_count = 0;
    for v in 0..n {
        if comp[v] == usize::MAX {
            for u in 0..n {
                if dist[v][u] != usize::MAX {
                    comp[u] = comp_count;
                }
            }
            comp_count += 1;
        }
    }
    let mut sizes = vec![0usize; comp_count];
    for v in 0..n {
        sizes[comp[v]] += 1;
    }
    let largest = *sizes.iter().max().unwrap_or(&0);
    let mut sentinel = 1usize;
    for c in 0..comp_count {
        if sizes[c] != largest {
            continue;
        }
        let mut diam = 0usize;
        for v in 0..n {
            if comp[v] != c {
                continue;
            }
            for u in 0..n {
                if comp[u] == c {
                    diam = diam.max(dist[v][u]);
                }
            }
        }
        sentinel = sentinel.max(diam + 1);
    }

    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = if dist[i][j] == usize::MAX {
                sentinel as f64
            } else {
                dist[i][j] as f64
            };
        }
    }
    let max = m.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        m.mapv_inplace(|v| v / max);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn degrees_and_neighbors() {
        let g = path3();
        assert_eq!(g.degrees(), &[1, 2, 1]);
        assert_eq!(g.neighbors(1), vec![0, 2]);
    }

    #[test]
    fn histogram_guards() {
        assert!(Histogram::new(array![0.5, 0.5]).is_ok());
        assert!(Histogram::new(array![0.5, 0.6]).is_err());
        assert!(Histogram::new(array![-0.5, 1.5]).is_err());
        assert!(Histogram::uniform(4).is_uniform());
    }

    #[test]
    fn normalized_laplacian_of_path() {
        let l = normalized_laplacian(&path3());
        let s = 1.0 / 2.0f64.sqrt();
        let expect = array![[1.0, -s, 0.0], [-s, 1.0, -s], [0.0, -s, 1.0]];
        for (a, b) in l.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_edgeless_graph_is_identity() {
        let g = Graph::from_edges(3, &[]).unwrap();
        let l = normalized_laplacian(&g);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(l[[i, j]], want);
            }
        }
    }

    #[test]
    fn max_eigenvalue_known_graphs() {
        // triangle: spectrum {0, 3/2, 3/2}; path: {0, 1, 2}
        let lt = normalized_laplacian(&triangle());
        assert!((max_laplacian_eigenvalue(&lt).unwrap() - 1.5).abs() < 1e-8);
        let lp = normalized_laplacian(&path3());
        assert!((max_laplacian_eigenvalue(&lp).unwrap() - 2.0).abs() < 1e-8);
        let zero = Array2::<f64>::zeros((3, 3));
        assert_eq!(max_laplacian_eigenvalue(&zero).unwrap(), 1.0);
    }

    #[test]
    fn laplacian_spectrum_within_bounds() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let e = linalg::symmetric_eigen(&normalized_laplacian(&g)).unwrap();
        assert!(e.values[0] > -1e-10);
        assert!(*e.values.last().unwrap() < 2.0 + 1e-10);
    }

    #[test]
    fn shortest_paths_connected() {
        let m = shortest_path_matrix(&path3());
        // raw distances 0..2 scaled by the max (2)
        assert_eq!(m[[0, 0]], 0.0);
        assert!((m[[0, 1]] - 0.5).abs() < 1e-12);
        assert!((m[[0, 2]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_paths_disconnected_pairs_carry_max() {
        // two disjoint edges: component diameter 1, sentinel 2
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let m = shortest_path_matrix(&g);
        assert!((m[[0, 1]] - 0.5).abs() < 1e-12);
        assert!((m[[0, 2]] - 1.0).abs() < 1e-12);
        assert!((m[[1, 3]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_paths_single_vertex() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let m = shortest_path_matrix(&g);
        assert_eq!(m[[0, 0]], 0.0);
    }

    #[test]
    fn graph_rejects_asymmetry_and_self_loops() {
        let bad = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(Graph::new(bad, Array2::zeros((0, 0)), None).is_err());
        let looped = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(Graph::new(looped, Array2::zeros((0, 0)), None).is_err());
    }
}
