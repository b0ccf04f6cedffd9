//! Conditional-gradient minimization of the pair objective.



use super::{sinkhorn_knopp, Coupling, PairContext, SolveResult};
use crate::error::{Result, RwkError};
use crate::linalg;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const BRACKET_WIDTH: f64 = 1e-6;
const MAX_EVALS: usize = 60;

/// Golden-section search for `argmin objective(alpha)` over `[0, upper]`.
///
/// `objective(0)` is taken to be `prev_cost` without an evaluation. Returns
/// the best probed point; if nothing improves on `prev_cost` the step is
/// rejected and `(0, prev_cost)` comes back, so the result never exceeds
/// `prev_cost`.
pub fn line_search<F: Fn(f64) -> f64>(objective: F, prev_cost: f64, upper: f64) -> (f64, f64) {
    debug_assert!(upper > 0.0);
    let mut best = (0.0, prev_cost);
    let mut evals = 0usize;
    let probe = |alpha: f64, best: &mut (f64, f64), evals: &mut usize| -> f64 {
        let c = objective(alpha);
        *evals += 1;
        if c < best.1 {
            *best = (alpha, c);
        }
        c
    };

    probe(upper, &mut best, &mut evals);
    let (mut lo, mut hi) = (0.0f64, upper);
    let mut c = hi - GOLDEN * (hi - lo);
    let mut d = lo + GOLDEN * (hi - lo);
    let mut fc = probe(c, &mut best, &mut evals);
    let mut fd = probe(d, &mut best, &mut evals);
    while hi - lo > BRACKET_WIDTH && evals < MAX_EVALS {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN * (hi - lo);
            fc = probe(c, &mut best, &mut evals);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN * (hi - lo);
            fd = probe(d, &mut best, &mut evals);
        }
    }
    probe(0.5 * (lo + hi), &mut best, &mut evals);
    best
}

/// Runs the conditional-gradient loop from the independence coupling.
///
/// Each iteration solves the linearized problem with entropic scaling, takes
/// the difference as the descent direction, line-searches the step, and
/// stops once the surrogate gap `<direction, -grad H>` falls to `epsilon`.
pub fn scg_solve(ctx: &PairContext) -> Result<SolveResult> {
    let cfg = &ctx.config;
    let mut gamma = Coupling::independent(&ctx.mu, &ctx.nu).matrix;
    let mut cost = ctx.objective(&gamma);
    if !cost.is_finite() {
        return Err(RwkError::Numeric("objective is non-finite at initialization".into()));
    }

    let mut objective_history = vec![cost];
    let mut gap_history = Vec::new();
    let mut alpha_history = Vec::new();
    let mut max_violation = 0.0f64;
    let mut converged = false;
    let mut iterations = 0;

    let h_weight = cfg.beta2 * cfg.lambda_g;
    let floor = cfg.log_floor;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let grad = ctx.grad_objective(&gamma);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(RwkError::Numeric(format!(
                "gradient has non-finite entries at iteration {iter}"
            )));
        }
        let hat = sinkhorn_knopp(&ctx.mu, &ctx.nu, &grad, cfg.sinkhorn_lambda, cfg.sinkhorn_iters)?;
        max_violation = max_violation.max(hat.marginal_violation(&ctx.mu, &ctx.nu));
        let delta = &hat.matrix - &gamma;
        let gap = -linalg::frobenius_inner(&delta, &grad);

        // f + g is exactly quadratic along the segment; fit it from three
        // evaluations and keep only the KL term per probe.
        let fg = |a: f64| {
            let point = &gamma + &(a * &delta);
            ctx.f_value(&point) + ctx.g_value(&point)
        };
        let fg0 = fg(0.0);
        let fg_half = fg(0.5);
        let fg1 = fg(1.0);
        let quad_a = 2.0 * fg1 + 2.0 * fg0 - 4.0 * fg_half;
        let quad_b = fg1 - fg0 - quad_a;
        let along = |a: f64| {
            let mut kl = 0.0;
            if h_weight != 0.0 {
                for ((&g, &d), &lp) in
                    gamma.iter().zip(delta.iter()).zip(ctx.log_prior.iter())
                {
                    let v = (g + a * d).max(floor);
                    kl += v * (v.ln() - lp);
                }
            }
            fg0 + quad_b * a + quad_a * a * a - h_weight * kl
        };

        let (alpha, new_cost) = line_search(along, cost, cfg.alpha0);
        gamma.scaled_add(alpha, &delta);
        cost = new_cost;

        gap_history.push(gap);
        alpha_history.push(alpha);
        objective_history.push(cost);
        if gap <= cfg.epsilon {
            converged = true;
            break;
        }
    }

    let objective = ctx.objective(&gamma);
    let breakdown = ctx.breakdown(&gamma);
    Ok(SolveResult {
        coupling: Coupling { matrix: gamma },
        objective,
        rw_value: breakdown.total,
        breakdown,
        iterations,
        converged,
        gap_history,
        objective_history,
        alpha_history,
        max_subproblem_violation: max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum_found() {
        // (alpha - 0.3)^2 + 1
        let f = |a: f64| (a - 0.3) * (a - 0.3) + 1.0;
        let (alpha, cost) = line_search(f, f(0.0), 1.0);
        assert!((alpha - 0.3).abs() < 1e-5);
        assert!((cost - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_objective_steps_to_the_boundary() {
        let f = |a: f64| 1.0 - a;
        let (alpha, cost) = line_search(f, 1.0, 0.99);
        assert!((alpha - 0.99).abs() < 1e-6);
        assert!((cost - 0.01).abs() < 1e-9);
    }

    #[test]
    fn increasing_objective_rejects_the_step() {
        let f = |a: f64| 5.0 + a;
        let (alpha, cost) = line_search(f, 5.0, 1.0);
        assert_eq!(alpha, 0.0);
        assert_eq!(cost, 5.0);
    }

    #[test]
    fn constant_objective_keeps_prev_cost() {
        let f = |_: f64| 2.5;
        let (_, cost) = line_search(f, 2.5, 1.0);
        assert_eq!(cost, 2.5);
    }
}
