//! Slow, independent reference implementations used to check the optimized
//! code paths in the main crates. Everything here favours obviousness over
//! speed: finite differences instead of analytic gradients, explicit
//! four-index sums instead of matrix identities, and assignment expansion
//! instead of iterative transport solvers.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Central finite-difference gradient of a scalar function of a matrix.
pub fn fd_gradient<F>(f: F, at: &Array2<f64>, step: f64) -> Array2<f64>
where
    F: Fn(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(at.raw_dim());
    let mut probe = at.clone();
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let orig = probe[[i, j]];
            probe[[i, j]] = orig + step;
            let plus = f(&probe);
            probe[[i, j]] = orig - step;
            let minus = f(&probe);
            probe[[i, j]] = orig;
            grad[[i, j]] = (plus - minus) / (2.0 * step);
        }
    }
    grad
}

/// Frobenius-relative disagreement, scaled by the second argument.
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        diff += (x - y) * (x - y);
        scale += y * y;
    }
    (diff / scale.max(1e-300)).sqrt()
}

/// Four-index structural cost sum, the direct reference for the fast path.
pub fn quadruple_structural_cost(
    cp1: &Array2<f64>,
    cp2: &Array2<f64>,
    gamma: &Array2<f64>,
) -> f64 {
    let (n1, n2) = (cp1.nrows(), cp2.nrows());
    let mut total = 0.0;
    for i in 0..n1 {
        for j in 0..n1 {
            for k in 0..n2 {
                for l in 0..n2 {
                    let d = cp1[[i, j]] - cp2[[k, l]];
                    total += 0.5 * d * d * gamma[[i, k]] * gamma[[j, l]];
                }
            }
        }
    }
    total
}

/// Minimum-cost perfect assignment on a square matrix via potentials.
/// Returns (column assigned to each row, total cost).
pub fn hungarian(cost: &Array2<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // row matched to each column, 0 = none
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        if matched[j] > 0 {
            assignment[matched[j] - 1] = j - 1;
            total += cost[[matched[j] - 1, j - 1]];
        }
    }
    (assignment, total)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn expand(cost: &Array2<f64>) -> (Array2<f64>, usize, usize, usize) {
    let (n1, n2) = (cost.nrows(), cost.ncols());
    let l = n1 / gcd(n1, n2) * n2;
    let (r1, r2) = (l / n1, l / n2);
    let mut expanded = Array2::zeros((l, l));
    for a in 0..l {
        for b in 0..l {
            expanded[[a, b]] = cost[[a / r1, b / r2]];
        }
    }
    (expanded, l, r1, r2)
}

/// Exact optimum of the transport program with uniform marginals.
///
/// Scaling by `L = lcm(n1, n2)` turns the program into an integer flow, so
/// expanding each source into `L/n1` unit copies and each target into
/// `L/n2` copies reduces it to a perfect assignment with the same value.
pub fn lp_transport_uniform(cost: &Array2<f64>) -> f64 {
    let (expanded, l, _, _) = expand(cost);
    let (_, total) = hungarian(&expanded);
    total / l as f64
}

/// Exact optimal plan for uniform marginals, recovered from the expanded
/// assignment by pooling unit flows back onto the original cells.
pub fn lp_transport_uniform_plan(cost: &Array2<f64>) -> Array2<f64> {
    let (n1, n2) = (cost.nrows(), cost.ncols());
    let (expanded, l, r1, r2) = expand(cost);
    let (assignment, _) = hungarian(&expanded);
    let mut plan = Array2::zeros((n1, n2));
    for (a, &b) in assignment.iter().enumerate() {
        plan[[a / r1, b / r2]] += 1.0 / l as f64;
    }
    plan
}

/// Seeded random graph skeleton: sorted edge list over `n` vertices with
/// edge probability `p`, plus `m` feature columns with entries in [0, 2).
/// Retries until at least one edge exists so structural costs stay
/// non-degenerate.
pub fn random_graph_spec(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: f64,
    m: usize,
) -> (Vec<(usize, usize)>, Array2<f64>) {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if edges.is_empty() && n > 1 {
            continue;
        }
        let mut x = Array2::zeros((n, m));
        for v in x.iter_mut() {
            *v = rng.gen::<f64>() * 2.0;
        }
        return (edges, x);
    }
}

/// Strictly positive matrix with total mass 1 and entries bounded away from
/// zero, not necessarily feasible for any marginal pair.
pub fn random_positive_mass(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n1, n2));
    let mut total = 0.0;
    for v in m.iter_mut() {
        *v = 0.05 + rng.gen::<f64>();
        total += *v;
    }
    m.mapv_inplace(|v| v / total);
    m
}
