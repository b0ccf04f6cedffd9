//! Scalar regularizers of the transport objective.

use ndarray::{Array1, Array2};

use crate::linalg;

/// Source-side smoothness of transported embeddings under uniform
/// histograms: `tr(E2^T gamma^T L1 gamma E2)`.
///
/// Equals the average disagreement of barycentric images across the edges of
/// the source graph when `L1` is its combinatorial Laplacian; see
/// [`omega_source_general`] for the non-uniform form.
pub fn omega_source(gamma: &Array2<f64>, l1: &Array2<f64>, e2: &Array2<f64>) -> f64 {
    let m = gamma.dot(e2);
    linalg::frobenius_inner(&m, &l1.dot(&m))
}

/// Barycentric smoothness for arbitrary marginals:
/// `tr(Ehat^T L1 Ehat) / n1^2` with `Ehat = diag(gamma 1)^{-1} gamma E2`.
///
/// Rows with zero transported mass get a zero barycenter. Under uniform
/// marginals this reduces to [`omega_source`].
pub fn omega_source_general(gamma: &Array2<f64>, l1: &Array2<f64>, e2: &Array2<f64>) -> f64 {
    let n1 = gamma.nrows();
    let row_mass: Array1<f64> = gamma.sum_axis(ndarray::Axis(1));
    let mut ehat = gamma.dot(e2);
    for (mut row, &mass) in ehat.rows_mut().into_iter().zip(row_mass.iter()) {
        if mass > 0.0 {
            row.mapv_inplace(|v| v / mass);
        } else {
            row.fill(0.0);
        }
    }
    linalg::frobenius_inner(&ehat, &l1.dot(&ehat)) / (n1 * n1) as f64
}

/// Combined strongly convex feature-branch regularizer:
/// `lambda_mu Omega_mu + lambda_nu Omega_nu + rho/2 |gamma|_F^2`.
#[allow(clippy::too_many_arguments)]
pub fn theta_w(
    gamma: &Array2<f64>,
    l1: &Array2<f64>,
    l2: &Array2<f64>,
    e1: &Array2<f64>,
    e2: &Array2<f64>,
    lambda_mu: f64,
    lambda_nu: f64,
    rho: f64,
) -> f64 {
    let mut v = 0.5 * rho * linalg::frobenius_norm_sq(gamma);
    if lambda_mu != 0.0 {
        v += lambda_mu * omega_source(gamma, l1, e2);
    }
    if lambda_nu != 0.0 {
        v += lambda_nu * super::omega_target(gamma, l2, e1);
    }
    v
}

/// KL divergence `sum gamma ln(gamma / prior)` with both operands floored
/// before the logarithms so vanishing entries contribute (numerically) zero.
pub fn theta_g(gamma: &Array2<f64>, prior: &Array2<f64>, floor: f64) -> f64 {
    debug_assert_eq!(gamma.dim(), prior.dim());
    gamma
        .iter()
        .zip(prior.iter())
        .map(|(&g, &p)| {
            let g = g.max(floor);
            let p = p.max(floor);
            g * (g.ln() - p.ln())
        })
        .sum()
}
