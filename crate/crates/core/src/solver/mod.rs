//! Regularized transport between two embedded graphs.
//!
//! The objective over the coupling polytope splits as `H = f + g - h`:
//! `f` carries the linear feature/neighbourhood costs plus the smoothness
//! and Frobenius regularizers, `g` the quadratic structural cost, and `h` a
//! KL divergence against a degree-similarity prior. `H` is minimized by
//! conditional-gradient steps whose linear subproblems are solved with
//! entropic scaling.

mod regularizers;
mod scg;
mod sinkhorn;

pub use regularizers::{omega_source, omega_source_general, theta_g, theta_w};
pub use scg::{line_search, scg_solve};
pub use sinkhorn::sinkhorn_knopp;

use ndarray::{Array1, Array2};

use crate::error::{Result, RwkError};
use crate::graph::Graph;
use crate::linalg;
use crate::similarity::{gw_cost_apply, SimilaritySet};

/// Solver hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the feature-transport branch.
    pub beta1: f64,
    /// Weight of the structural branch.
    pub beta2: f64,
    /// Source-side smoothness weight.
    pub lambda_mu: f64,
    /// Target-side smoothness weight.
    pub lambda_nu: f64,
    /// Frobenius regularizer weight.
    pub rho: f64,
    /// Weight of the KL term inside the structural branch.
    pub lambda_g: f64,
    /// Entropic temperature of the scaling subproblem.
    pub sinkhorn_lambda: f64,
    /// Scaling rounds per subproblem.
    pub sinkhorn_iters: usize,
    /// Conditional-gradient iteration budget.
    pub max_iters: usize,
    /// Convergence threshold on the surrogate gap.
    pub epsilon: f64,
    /// Upper bound of the step-size search.
    pub alpha0: f64,
    /// Clamp applied before logarithms.
    pub log_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta1: 0.5,
            beta2: 0.5,
            lambda_mu: 0.01,
            lambda_nu: 0.01,
            rho: 0.01,
            lambda_g: 0.01,
            sinkhorn_lambda: 0.1,
            sinkhorn_iters: 50,
            max_iters: 10,
            epsilon: 1e-6,
            alpha0: 0.99,
            log_floor: 1e-30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(RwkError::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit(self.beta1, "beta1")?;
        unit(self.beta2, "beta2")?;
        unit(self.lambda_mu, "lambda_mu")?;
        unit(self.lambda_nu, "lambda_nu")?;
        unit(self.lambda_g, "lambda_g")?;
        if self.rho <= 0.0 || self.rho > 1.0 {
            return Err(RwkError::Config(format!("rho = {} outside (0, 1]", self.rho)));
        }
        if self.sinkhorn_lambda <= 0.0 {
            return Err(RwkError::Config("sinkhorn_lambda must be positive".into()));
        }
        if self.sinkhorn_iters == 0 || self.max_iters == 0 {
            return Err(RwkError::Config("iteration counts must be at least 1".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(RwkError::Config("epsilon must be positive".into()));
        }
        if self.alpha0 <= 0.0 || self.alpha0 > 1.0 {
            return Err(RwkError::Config(format!("alpha0 = {} outside (0, 1]", self.alpha0)));
        }
        if self.log_floor <= 0.0 {
            return Err(RwkError::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Transport plan between two vertex sets.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub matrix: Array2<f64>,
}

impl Coupling {
    /// Independence initialization `mu nu^T`; always exactly feasible.
    pub fn independent(mu: &Array1<f64>, nu: &Array1<f64>) -> Self {
        let mut m = Array2::zeros((mu.len(), nu.len()));
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                m[[i, j]] = mu[i] * nu[j];
            }
        }
        Coupling { matrix: m }
    }

    /// L1 deviation of both marginals from their targets.
    pub fn marginal_violation(&self, mu: &Array1<f64>, nu: &Array1<f64>) -> f64 {
        let rows = self.matrix.sum_axis(ndarray::Axis(1));
        let cols = self.matrix.sum_axis(ndarray::Axis(0));
        let r: f64 = rows.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).sum();
        let c: f64 = cols.iter().zip(nu.iter()).map(|(a, b)| (a - b).abs()).sum();
        r + c
    }

    pub fn validate(&self, mu: &Array1<f64>, nu: &Array1<f64>, tol: f64) -> Result<()> {
        if self.matrix.dim() != (mu.len(), nu.len()) {
            return Err(RwkError::Dimension(format!(
                "coupling is {:?}, marginals are {} and {}",
                self.matrix.dim(),
                mu.len(),
                nu.len()
            )));
        }
        if self.matrix.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(RwkError::Integrity("coupling has negative or non-finite mass".into()));
        }
        let v = self.marginal_violation(mu, nu);
        if v > tol {
            return Err(RwkError::Integrity(format!(
                "coupling marginal violation {v:.3e} exceeds {tol:.3e}"
            )));
        }
        Ok(())
    }
}

/// Degree-similarity prior over vertex pairs (the KL reference).
///
/// Raw affinity is `1 - |d_i - d_j| / max(d_i, d_j)`, with 1 when both
/// degrees vanish. Rows are floored, normalized to unit sum, and the whole
/// matrix divided by n1, so the prior is strictly positive with total mass 1.
pub fn prior_coupling(g1: &Graph, g2: &Graph, log_floor: f64) -> Array2<f64> {
    prior_from_degrees(g1.degrees(), g2.degrees(), log_floor)
}

pub(crate) fn prior_from_degrees(deg1: &[usize], deg2: &[usize], log_floor: f64) -> Array2<f64> {
    let (n1, n2) = (deg1.len(), deg2.len());
    let mut prior = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let di = deg1[i] as f64;
            let dj = deg2[j] as f64;
            let affinity = if di == 0.0 && dj == 0.0 {
                1.0
            } else {
                1.0 - (di - dj).abs() / di.max(dj)
            };
            prior[[i, j]] = affinity.max(log_floor);
        }
    }
    for mut row in prior.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / (s * n1 as f64));
    }
    prior
}

/// Everything fixed about one graph pair while the coupling varies.
#[derive(Debug, Clone)]
pub struct PairContext {
    pub sim: SimilaritySet,
    /// Combinatorial Laplacians of the two graphs.
    pub l1: Array2<f64>,
    pub l2: Array2<f64>,
    /// Continuous structure embeddings of each side, n x k.
    pub e1: Array2<f64>,
    pub e2: Array2<f64>,
    pub prior: Array2<f64>,
    log_prior: Array2<f64>,
    pub mu: Array1<f64>,
    pub nu: Array1<f64>,
    pub config: SolverConfig,
}

/// Objective value split into its reported components.
#[derive(Debug, Clone, Copy)]
pub struct Breakdown {
    /// `<gamma, C^V>`
    pub feature: f64,
    /// `<gamma, C^N>`
    pub neighbourhood: f64,
    /// Smoothness and Frobenius regularizers.
    pub smoothness: f64,
    /// `<gamma, structural cost applied to gamma>`
    pub structure: f64,
    /// KL divergence from the degree prior.
    pub divergence: f64,
    /// Assembled discrepancy (equals the minimized objective).
    pub total: f64,
}

impl PairContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sim: SimilaritySet,
        l1: Array2<f64>,
        l2: Array2<f64>,
        e1: &Array2<f64>,
        e2: &Array2<f64>,
        prior: Array2<f64>,
        mu: Array1<f64>,
        nu: Array1<f64>,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (n1, n2) = sim.cv.dim();
        if sim.cn.dim() != (n1, n2) {
            return Err(RwkError::Dimension("cost matrices disagree on shape".into()));
        }
        if sim.cp_source.dim() != (n1, n1) || sim.cp_target.dim() != (n2, n2) {
            return Err(RwkError::Dimension("pairwise matrices disagree with coupling shape".into()));
        }
        if linalg::asymmetry(&sim.cp_source) > 1e-8 || linalg::asymmetry(&sim.cp_target) > 1e-8 {
            return Err(RwkError::Integrity("pairwise distance matrices must be symmetric".into()));
        }
        if l1.dim() != (n1, n1) || l2.dim() != (n2, n2) {
            return Err(RwkError::Dimension("Laplacian shapes disagree with graphs".into()));
        }
        if e1.nrows() != n1 || e2.nrows() != n2 || e1.ncols() != e2.ncols() {
            return Err(RwkError::Dimension("structure embeddings disagree on shape".into()));
        }
        if prior.dim() != (n1, n2) {
            return Err(RwkError::Dimension("prior shape disagrees with coupling".into()));
        }
        if mu.len() != n1 || nu.len() != n2 {
            return Err(RwkError::Dimension("histogram lengths disagree with graphs".into()));
        }
        let floor = config.log_floor;
        let log_prior = prior.mapv(|v| v.max(floor).ln());
        Ok(PairContext {
            sim,
            l1,
            l2,
            e1: e1.clone(),
            e2: e2.clone(),
            prior,
            log_prior,
            mu,
            nu,
            config,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.sim.cv.dim()
    }

    /// Linear costs plus the strongly convex regularizers.
    pub fn f_value(&self, gamma: &Array2<f64>) -> f64 {
        let c = &self.config;
        let mut v = linalg::frobenius_inner(gamma, &self.sim.cv)
            + c.beta1 * linalg::frobenius_inner(gamma, &self.sim.cn)
            + c.beta1 * 0.5 * c.rho * linalg::frobenius_norm_sq(gamma);
        if c.lambda_mu != 0.0 {
            v += c.beta1 * c.lambda_mu * omega_source(gamma, &self.l1, &self.e2);
        }
        if c.lambda_nu != 0.0 {
            v += c.beta1 * c.lambda_nu * omega_target(gamma, &self.l2, &self.e1);
        }
        v
    }

    /// Quadratic structural cost.
    pub fn g_value(&self, gamma: &Array2<f64>) -> f64 {
        if self.config.beta2 == 0.0 {
            return 0.0;
        }
        let applied = gw_cost_apply(&self.sim.cp_source, &self.sim.cp_target, gamma)
            .expect("shapes validated at construction");
        self.config.beta2 * linalg::frobenius_inner(gamma, &applied)
    }

    /// KL term, subtracted from the objective.
    pub fn h_value(&self, gamma: &Array2<f64>) -> f64 {
        if self.config.beta2 == 0.0 || self.config.lambda_g == 0.0 {
            return 0.0;
        }
        self.config.beta2
            * self.config.lambda_g
            * theta_g(gamma, &self.prior, self.config.log_floor)
    }

    /// Full objective `H = f + g - h`.
    pub fn objective(&self, gamma: &Array2<f64>) -> f64 {
        self.f_value(gamma) + self.g_value(gamma) - self.h_value(gamma)
    }

    pub fn grad_f(&self, gamma: &Array2<f64>) -> Array2<f64> {
        let c = &self.config;
        let mut g = &self.sim.cv + &(c.beta1 * &self.sim.cn);
        g.scaled_add(c.beta1 * c.rho, gamma);
        if c.lambda_mu != 0.0 {
            // grad of tr(E2^T gamma^T L1 gamma E2): (L1^T + L1) gamma E2 E2^T
            let right = gamma.dot(&self.e2).dot(&self.e2.t());
            let full = self.l1.t().dot(&right) + self.l1.dot(&right);
            g.scaled_add(c.beta1 * c.lambda_mu, &full);
        }
        if c.lambda_nu != 0.0 {
            // grad of tr(E1^T gamma L2 gamma^T E1): E1 E1^T gamma (L2^T + L2)
            let left = self.e1.dot(&self.e1.t().dot(gamma));
            let full = left.dot(&self.l2.t()) + left.dot(&self.l2);
            g.scaled_add(c.beta1 * c.lambda_nu, &full);
        }
        g
    }

    pub fn grad_g(&self, gamma: &Array2<f64>) -> Array2<f64> {
        if self.config.beta2 == 0.0 {
            return Array2::zeros(gamma.dim());
        }
        let applied = gw_cost_apply(&self.sim.cp_source, &self.sim.cp_target, gamma)
            .expect("shapes validated at construction");
        2.0 * self.config.beta2 * applied
    }

    pub fn grad_h(&self, gamma: &Array2<f64>) -> Array2<f64> {
        let c = &self.config;
        if c.beta2 == 0.0 || c.lambda_g == 0.0 {
            return Array2::zeros(gamma.dim());
        }
        let w = c.beta2 * c.lambda_g;
        let mut out = Array2::zeros(gamma.dim());
        for (o, (&g, &lp)) in out.iter_mut().zip(gamma.iter().zip(self.log_prior.iter())) {
            *o = w * (1.0 + g.max(c.log_floor).ln() - lp);
        }
        out
    }

    /// `grad H = grad f + grad g - grad h`.
    pub fn grad_objective(&self, gamma: &Array2<f64>) -> Array2<f64> {
        let mut g = self.grad_f(gamma);
        if self.config.beta2 != 0.0 {
            g += &self.grad_g(gamma);
            if self.config.lambda_g != 0.0 {
                g -= &self.grad_h(gamma);
            }
        }
        g
    }

    /// Component-wise report; `total` re-assembles the objective.
    pub fn breakdown(&self, gamma: &Array2<f64>) -> Breakdown {
        let c = &self.config;
        let feature = linalg::frobenius_inner(gamma, &self.sim.cv);
        let neighbourhood = linalg::frobenius_inner(gamma, &self.sim.cn);
        let mut smoothness = 0.5 * c.rho * linalg::frobenius_norm_sq(gamma);
        if c.lambda_mu != 0.0 {
            smoothness += c.lambda_mu * omega_source(gamma, &self.l1, &self.e2);
        }
        if c.lambda_nu != 0.0 {
            smoothness += c.lambda_nu * omega_target(gamma, &self.l2, &self.e1);
        }
        let structure = if c.beta2 == 0.0 { 0.0 } else { self.g_value(gamma) / c.beta2 };
        let divergence = theta_g(gamma, &self.prior, c.log_floor);
        let total = feature
            + c.beta1 * (neighbourhood + smoothness)
            + c.beta2 * (structure - c.lambda_g * divergence);
        Breakdown { feature, neighbourhood, smoothness, structure, divergence, total }
    }
}

/// Target-side smoothness `tr(E1^T gamma L2 gamma^T E1)`; mirrors
/// [`omega_source`] with the roles of the two graphs swapped.
pub fn omega_target(gamma: &Array2<f64>, l2: &Array2<f64>, e1: &Array2<f64>) -> f64 {
    let m = gamma.t().dot(e1);
    linalg::frobenius_inner(&m, &l2.dot(&m))
}

/// Per-iteration record of one conditional-gradient run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub coupling: Coupling,
    /// Objective at the returned coupling.
    pub objective: f64,
    /// Discrepancy assembled from components; equals `objective` up to
    /// accumulation error.
    pub rw_value: f64,
    pub breakdown: Breakdown,
    pub iterations: usize,
    pub converged: bool,
    pub gap_history: Vec<f64>,
    /// Objective trace, starting at the independence coupling.
    pub objective_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
    /// Largest marginal violation among the scaling subproblem outputs.
    pub max_subproblem_violation: f64,
}
