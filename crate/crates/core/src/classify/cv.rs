//! Stratified cross-validation over a precomputed Gram matrix, with an inner
//! fold loop selecting kernel and margin parameters.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RwkError};
use crate::kernel::{psd_repair, GramMatrix, RepairMode};

use super::svm::{svm_decision, svm_train, SvmModel};

const SVM_TOL: f64 = 1e-3;

/// Grid searched by the inner folds.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    pub c_values: Vec<f64>,
    /// Exponent rescalings applied to the base Gram matrix.
    pub eta_scales: Vec<f64>,
    pub repair_modes: Vec<RepairMode>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid {
            c_values: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            eta_scales: vec![0.1, 1.0, 10.0],
            repair_modes: vec![RepairMode::Clip],
        }
    }
}

impl ParamGrid {
    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.eta_scales.is_empty() || self.repair_modes.is_empty() {
            return Err(RwkError::Config("parameter grid has an empty axis".into()));
        }
        if self.c_values.iter().any(|&c| !(c > 0.0)) {
            return Err(RwkError::Config("C grid values must be positive".into()));
        }
        if self.eta_scales.iter().any(|&s| !(s > 0.0)) {
            return Err(RwkError::Config("eta scale values must be positive".into()));
        }
        Ok(())
    }
}

/// Chosen parameters plus per-fold accuracy.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub accuracy: f64,
    pub chosen_c: f64,
    pub chosen_eta_scale: f64,
    pub chosen_repair: RepairMode,
    pub test_size: usize,
}

/// Deterministic evaluation summary. Holds no timing data, so a repeated run
/// with the same inputs serializes to identical bytes.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub dataset: String,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub folds: Vec<FoldOutcome>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dataset = {}\n", self.dataset));
        out.push_str(&format!(
            "folds = {} outer / {} inner, seed = {}\n",
            self.outer_folds, self.inner_folds, self.seed
        ));
        for (i, f) in self.folds.iter().enumerate() {
            out.push_str(&format!(
                "fold {:2}: accuracy = {:.6} (test = {:3}, C = {}, eta_scale = {}, repair = {})\n",
                i,
                f.accuracy,
                f.test_size,
                f.chosen_c,
                f.chosen_eta_scale,
                f.chosen_repair.as_str()
            ));
        }
        out.push_str(&format!(
            "mean accuracy = {:.6}\nstd accuracy = {:.6}\n",
            self.mean_accuracy, self.std_accuracy
        ));
        out
    }
}

/// Splits `labels` into `fold_count` class-balanced folds. Each class is
/// shuffled with its own stream offset and dealt round-robin, so fold sizes
/// differ by at most one per class.
pub fn stratified_folds(
    labels: &[usize],
    class_count: usize,
    fold_count: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if fold_count < 2 {
        return Err(RwkError::Config(format!("need at least 2 folds, got {fold_count}")));
    }
    if labels.len() < fold_count {
        return Err(RwkError::Config(format!(
            "{} samples cannot fill {} folds",
            labels.len(),
            fold_count
        )));
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); fold_count];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cursor = 0usize;
    for class in 0..class_count {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            folds[cursor % fold_count].push(idx);
            cursor += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// One-vs-rest ensemble. Classes with no positive training examples keep a
/// `None` slot and can never win the vote.
#[derive(Debug)]
pub struct OneVsRest {
    pub class_count: usize,
    pub models: Vec<Option<SvmModel>>,
}

pub fn one_vs_rest_train(
    k_train: &Array2<f64>,
    labels: &[usize],
    class_count: usize,
    c: f64,
) -> Result<OneVsRest> {
    if class_count < 2 {
        return Err(RwkError::Config(format!(
            "need at least 2 classes, got {class_count}"
        )));
    }
    let mut models = Vec::with_capacity(class_count);
    for class in 0..class_count {
        if labels.iter().any(|&l| l == class) {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            models.push(Some(svm_train(k_train, &y, c, SVM_TOL)?));
        } else {
            models.push(None);
        }
    }
    Ok(OneVsRest { class_count, models })
}

/// Predicts by the largest decision value; ties resolve to the smaller class
/// index. With two classes this reduces to the sign of the positive-class
/// decision.
pub fn one_vs_rest_predict(ensemble: &OneVsRest, k_cross: &Array2<f64>) -> Vec<usize> {
    let rows = k_cross.nrows();
    let mut best_value = vec![f64::NEG_INFINITY; rows];
    let mut best_class = vec![0usize; rows];
    let mut first = true;
    for (class, slot) in ensemble.models.iter().enumerate() {
        let Some(model) = slot else { continue };
        let dec = svm_decision(model, k_cross);
        for (r, &v) in dec.iter().enumerate() {
            if first || v > best_value[r] {
                best_value[r] = v;
                best_class[r] = class;
            }
        }
        first = false;
    }
    best_class
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len() as f64
}

/// Elementwise power of a Gram matrix. For entries exp(-eta * d) this swaps
/// eta for eta * scale without re-solving any transport problem.
fn rescale_gram(base: &Array2<f64>, scale: f64) -> Array2<f64> {
    if scale == 1.0 {
        return base.clone();
    }
    base.mapv(|v| v.powf(scale))
}

fn submatrix(full: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            out[[ri, ci]] = full[[r, c]];
        }
    }
    out
}

/// Cache of repaired full-size kernels, keyed by grid position. The repair
/// sees the whole matrix once; folds then slice the repaired result.
struct RepairedCache {
    entries: Vec<Option<Array2<f64>>>,
    modes: usize,
}

impl RepairedCache {
    fn new(scales: usize, modes: usize) -> Self {
        RepairedCache { entries: vec![None; scales * modes], modes }
    }

    fn get(
        &mut self,
        base: &Array2<f64>,
        grid: &ParamGrid,
        scale_idx: usize,
        mode_idx: usize,
    ) -> Result<&Array2<f64>> {
        let key = scale_idx * self.modes + mode_idx;
        if self.entries[key].is_none() {
            let scaled = GramMatrix {
                values: rescale_gram(base, grid.eta_scales[scale_idx]),
                dataset: String::new(),
                config_hash: String::new(),
                repaired: false,
            };
            let (repaired, _) = psd_repair(&scaled, grid.repair_modes[mode_idx])?;
            self.entries[key] = Some(repaired.values);
        }
        Ok(self.entries[key].as_ref().unwrap())
    }
}

/// Nested cross-validation. Outer folds estimate accuracy; inner folds pick
/// `(C, eta scale, repair)` per outer fold by mean inner accuracy, breaking
/// ties toward the earliest grid position.
pub fn nested_cv(
    gram: &GramMatrix,
    labels: &[usize],
    class_count: usize,
    grid: &ParamGrid,
    outer_folds: usize,
    inner_folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    grid.validate()?;
    let n = labels.len();
    if gram.values.nrows() != n {
        return Err(RwkError::Dimension(format!(
            "gram is {}x{} for {} labels",
            gram.values.nrows(),
            gram.values.ncols(),
            n
        )));
    }
    let outer = stratified_folds(labels, class_count, outer_folds, seed)?;
    let mut cache = RepairedCache::new(grid.eta_scales.len(), grid.repair_modes.len());

    let mut folds = Vec::with_capacity(outer_folds);
    for (fold_idx, test_set) in outer.iter().enumerate() {
        let train_set: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        let train_labels: Vec<usize> = train_set.iter().map(|&i| labels[i]).collect();

        // inner selection on the training portion only
        let inner = stratified_folds(
            &train_labels,
            class_count,
            inner_folds,
            seed.wrapping_add(1 + fold_idx as u64),
        )?;
        let mut best_score = f64::NEG_INFINITY;
        let mut best = (0usize, 0usize, 0usize);
        for (si, _) in grid.eta_scales.iter().enumerate() {
            for (mi, _) in grid.repair_modes.iter().enumerate() {
                let repaired = cache.get(&gram.values, grid, si, mi)?.clone();
                for (ci, &c) in grid.c_values.iter().enumerate() {
                    let mut correct = 0usize;
                    let mut total = 0usize;
                    for inner_test in &inner {
                        let inner_train: Vec<usize> = (0..train_set.len())
                            .filter(|i| !inner_test.contains(i))
                            .collect();
                        let tr_idx: Vec<usize> =
                            inner_train.iter().map(|&i| train_set[i]).collect();
                        let te_idx: Vec<usize> =
                            inner_test.iter().map(|&i| train_set[i]).collect();
                        let tr_lab: Vec<usize> =
                            inner_train.iter().map(|&i| train_labels[i]).collect();
                        let te_lab: Vec<usize> =
                            inner_test.iter().map(|&i| train_labels[i]).collect();
                        let k_tr = submatrix(&repaired, &tr_idx, &tr_idx);
                        let k_te = submatrix(&repaired, &te_idx, &tr_idx);
                        let ensemble =
                            one_vs_rest_train(&k_tr, &tr_lab, class_count, c)?;
                        let pred = one_vs_rest_predict(&ensemble, &k_te);
                        correct +=
                            pred.iter().zip(&te_lab).filter(|(p, t)| p == t).count();
                        total += te_lab.len();
                    }
                    let score = correct as f64 / total.max(1) as f64;
                    if score > best_score {
                        best_score = score;
                        best = (ci, si, mi);
                    }
                }
            }
        }

        let (ci, si, mi) = best;
        let repaired = cache.get(&gram.values, grid, si, mi)?.clone();
        let k_tr = submatrix(&repaired, &train_set, &train_set);
        let k_te = submatrix(&repaired, test_set, &train_set);
        let test_labels: Vec<usize> = test_set.iter().map(|&i| labels[i]).collect();
        let ensemble =
            one_vs_rest_train(&k_tr, &train_labels, class_count, grid.c_values[ci])?;
        let pred = one_vs_rest_predict(&ensemble, &k_te);
        folds.push(FoldOutcome {
            accuracy: accuracy(&pred, &test_labels),
            chosen_c: grid.c_values[ci],
            chosen_eta_scale: grid.eta_scales[si],
            chosen_repair: grid.repair_modes[mi],
            test_size: test_set.len(),
        });
    }

    let mean = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
    let var = folds
        .iter()
        .map(|f| (f.accuracy - mean).powi(2))
        .sum::<f64>()
        / folds.len() as f64;
    Ok(EvalReport {
        dataset: gram.dataset.clone(),
        outer_folds,
        inner_folds,
        seed,
        folds,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
    })
}
