//! Entropic scaling solver for the linear subproblem.

use ndarray::{Array1, Array2};

use super::Coupling;
use crate::error::{Result, RwkError};

/// Exponent clamp keeping the kernel strictly positive in f64.
const MIN_EXPONENT: f64 = -700.0;

/// Approximates `argmin_{gamma in Pi(mu, nu)} <gamma, cost>` by `iters`
/// rounds of alternating marginal scaling on the kernel
/// `exp(-(cost - min cost) / lambda)`.
///
/// The min-shift only rescales the two scaling vectors, so the returned plan
/// is unchanged by it while the exponentials stay in range. All entries of
/// the result are strictly positive.
pub fn sinkhorn_knopp(
    mu: &Array1<f64>,
    nu: &Array1<f64>,
    cost: &Array2<f64>,
    lambda: f64,
    iters: usize,
) -> Result<Coupling> {
    let (n1, n2) = cost.dim();
    if mu.len() != n1 || nu.len() != n2 {
        return Err(RwkError::Dimension(format!(
            "cost is {n1}x{n2} but marginals have lengths {} and {}",
            mu.len(),
            nu.len()
        )));
    }
    if lambda <= 0.0 {
        return Err(RwkError::Config("scaling temperature must be positive".into()));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(RwkError::Numeric("scaling cost has non-finite entries".into()));
    }

    let min = cost.iter().cloned().fold(f64::INFINITY, f64::min);
    let kernel = cost.mapv(|c| ((-(c - min) / lambda).max(MIN_EXPONENT)).exp());

    let mut u = Array1::<f64>::ones(n1);
    let mut v = Array1::<f64>::ones(n2);
    for _ in 0..iters {
        let kv = kernel.dot(&v);
        for i in 0..n1 {
            u[i] = mu[i] / kv[i];
        }
        let ktu = kernel.t().dot(&u);
        for j in 0..n2 {
            v[j] = nu[j] / ktu[j];
        }
    }

    let mut plan = kernel;
    for i in 0..n1 {
        for j in 0..n2 {
            plan[[i, j]] *= u[i] * v[j];
        }
    }
    if plan.iter().any(|v| !v.is_finite()) {
        return Err(RwkError::Numeric("scaling produced non-finite coupling entries".into()));
    }
    Ok(Coupling { matrix: plan })
}
