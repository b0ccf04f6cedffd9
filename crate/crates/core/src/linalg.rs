//! Dense symmetric eigendecomposition and small matrix helpers.
//!
//! All spectra in this crate come from graphs of desk scale (a few hundred
//! vertices at most), so a dense solve is always acceptable.

use ndarray::{Array1, Array2};

use crate::error::{Result, RwkError};

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
///
/// `vectors` holds the eigenvector for `values[d]` in column `d`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(A + Aᵀ)/2` before factoring, so callers may
/// pass matrices that are symmetric only up to roundoff.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(RwkError::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(RwkError::Numeric(
            "eigendecomposition input has non-finite entries".into(),
        ));
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let se = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = se.eigenvalues[src];
        for r in 0..n {
            vectors[[r, dst]] = se.eigenvectors[(r, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &Array2<f64>) -> Result<f64> {
    let eig = symmetric_eigen(a)?;
    eig.values
        .last()
        .copied()
        .ok_or_else(|| RwkError::Dimension("empty matrix has no eigenvalues".into()))
}

/// Frobenius inner product `<a, b>`.
pub fn frobenius_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Squared Frobenius norm.
pub fn frobenius_norm_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Max absolute asymmetry `max |A - Aᵀ|`.
pub fn asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal_is_sorted_identity_basis() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        // column 0 pairs with eigenvalue 1 -> e_1 direction
        assert!(e.vectors[[1, 0]].abs() > 0.999);
        assert!(e.vectors[[0, 1]].abs() > 0.999);
    }

    #[test]
    fn eigen_reconstructs_input() {
        let a = array![
            [2.0, -1.0, 0.0],
            [-1.0, 2.0, -1.0],
            [0.0, -1.0, 2.0]
        ];
        let e = symmetric_eigen(&a).unwrap();
        let lam = Array2::from_diag(&e.values);
        let rec = e.vectors.dot(&lam).dot(&e.vectors.t());
        for (x, y) in a.iter().zip(rec.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        // known spectrum of tridiag(-1, 2, -1), n = 3
        let expect = [2.0 - std::f64::consts::SQRT_2, 2.0, 2.0 + std::f64::consts::SQRT_2];
        for (v, w) in e.values.iter().zip(expect.iter()) {
            assert!((v - w).abs() < 1e-10);
        }
    }

    #[test]
    fn non_square_rejected() {
        let a = Array2::<f64>::zeros((2, 3));
        assert!(symmetric_eigen(&a).is_err());
    }
}
