//! Two-class support vector machine on a precomputed kernel, solved in the
//! dual by most-violating-pair coordinate updates.

use ndarray::Array2;

use crate::error::{Result, RwkError};

/// Curvature floor for near-singular working pairs.
const TAU: f64 = 1e-12;
/// Curvature below this signals an indefinite kernel.
const CURVATURE_LIMIT: f64 = -1e-6;
const MAX_UPDATES: usize = 200_000;

/// Trained two-class model. Indices refer to the training kernel the model
/// was fitted on.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub support_indices: Vec<usize>,
    /// `alpha_i * y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Remaining KKT violation when the solver stopped.
    pub kkt_violation: f64,
    pub updates: usize,
    /// Set when training collapsed to a constant decision (single label).
    pub constant: Option<f64>,
}

enum SmoOutcome {
    Solved { alpha: Vec<f64>, grad: Vec<f64>, violation: f64, updates: usize },
    Indefinite,
}

fn smo(k: &Array2<f64>, y: &[f64], c: f64, tol: f64) -> SmoOutcome {
    let n = y.len();
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n]; // gradient of 1/2 a'Qa - e'a at a = 0
    let mut updates = 0usize;
    loop {
        // most violating pair over the feasible index sets
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut mm_val = f64::INFINITY;
        let mut mm_idx = usize::MAX;
        for i in 0..n {
            let v = -y[i] * grad[i];
            let up = (y[i] > 0.0 && alpha[i] < c) || (y[i] < 0.0 && alpha[i] > 0.0);
            let low = (y[i] < 0.0 && alpha[i] < c) || (y[i] > 0.0 && alpha[i] > 0.0);
            if up && v > m_val {
                m_val = v;
                m_idx = i;
            }
            if low && v < mm_val {
                mm_val = v;
                mm_idx = i;
            }
        }
        let violation = if m_idx == usize::MAX || mm_idx == usize::MAX {
            0.0
        } else {
            m_val - mm_val
        };
        if violation <= tol || updates >= MAX_UPDATES {
            return SmoOutcome::Solved { alpha, grad, violation: violation.max(0.0), updates };
        }
        let (i, j) = (m_idx, mm_idx);

        let mut a = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        if a < CURVATURE_LIMIT {
            return SmoOutcome::Indefinite;
        }
        if a <= TAU {
            a = TAU;
        }
        // step along alpha_i += y_i d, alpha_j -= y_j d
        let mut d = (m_val - mm_val) / a;
        let cap_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        d = d.min(cap_i).min(cap_j);
        alpha[i] += y[i] * d;
        alpha[j] -= y[j] * d;
        for t in 0..n {
            grad[t] += y[t] * d * (k[[t, i]] - k[[t, j]]);
        }
        updates += 1;
    }
}

/// Trains on a symmetric training-set kernel `k` with labels in {-1, +1}.
///
/// An indefinite kernel (curvature below -1e-6 on a working pair) gets one
/// retry with 1e-8 diagonal jitter before failing. Single-label inputs
/// produce a constant decision.
pub fn svm_train(k: &Array2<f64>, y: &[f64], c: f64, tol: f64) -> Result<SvmModel> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(RwkError::Dimension(format!(
            "kernel is {}x{} for {} labels",
            k.nrows(),
            k.ncols(),
            n
        )));
    }
    if n == 0 {
        return Err(RwkError::Config("empty training set".into()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(RwkError::Config("labels must be +1 or -1".into()));
    }
    if c <= 0.0 {
        return Err(RwkError::Config(format!("C = {c} must be positive")));
    }

    if y.iter().all(|&v| v == y[0]) {
        return Ok(SvmModel {
            support_indices: Vec::new(),
            coefficients: Vec::new(),
            bias: y[0],
            c,
            kkt_violation: 0.0,
            updates: 0,
            constant: Some(y[0]),
        });
    }

    let outcome = match smo(k, y, c, tol) {
        SmoOutcome::Solved { alpha, grad, violation, updates } => {
            (alpha, grad, violation, updates)
        }
        SmoOutcome::Indefinite => {
            // jitter the diagonal once and retry
            let mut kj = k.clone();
            for i in 0..n {
                kj[[i, i]] += 1e-8;
            }
            match smo(&kj, y, c, tol) {
                SmoOutcome::Solved { alpha, grad, violation, updates } => {
                    (alpha, grad, violation, updates)
                }
                SmoOutcome::Indefinite => {
                    return Err(RwkError::Numeric(
                        "kernel is indefinite beyond tolerance even after jitter".into(),
                    ));
                }
            }
        }
    };
    let (alpha, grad, violation, updates) = outcome;

    // bias from free support vectors, else from the bound midpoint
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for i in 0..n {
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += -y[i] * grad[i];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..n {
            let v = -y[i] * grad[i];
            if (y[i] > 0.0 && alpha[i] < c) || (y[i] < 0.0 && alpha[i] > 0.0) {
                up = up.max(v);
            }
            if (y[i] < 0.0 && alpha[i] < c) || (y[i] > 0.0 && alpha[i] > 0.0) {
                low = low.min(v);
            }
        }
        0.5 * (up + low)
    };

    let mut support_indices = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support_indices.push(i);
            coefficients.push(alpha[i] * y[i]);
        }
    }
    Ok(SvmModel {
        support_indices,
        coefficients,
        bias,
        c,
        kkt_violation: violation,
        updates,
        constant: None,
    })
}

/// Decision values for rows of a (test x train) kernel block.
pub fn svm_decision(model: &SvmModel, k_cross: &Array2<f64>) -> Vec<f64> {
    if let Some(v) = model.constant {
        return vec![v; k_cross.nrows()];
    }
    (0..k_cross.nrows())
        .map(|t| {
            let mut acc = model.bias;
            for (s, &idx) in model.support_indices.iter().enumerate() {
                acc += model.coefficients[s] * k_cross[[t, idx]];
            }
            acc
        })
        .collect()
}

/// Hard labels from decision values; exact zeros resolve to +1.
pub fn svm_predict(model: &SvmModel, k_cross: &Array2<f64>) -> Vec<f64> {
    svm_decision(model, k_cross)
        .into_iter()
        .map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}
