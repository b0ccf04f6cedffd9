//! The analytic gradients, the fast structural-cost path, and the entropic
//! subproblem are each checked against independent reference
//! implementations.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rwk_core::graph::Graph;
use rwk_core::pipeline::{pair_context, ArtifactOptions, FeatureMode, GraphArtifacts, PairwiseMode};
use rwk_core::similarity::gw_cost_apply;
use rwk_core::solver::{scg_solve, sinkhorn_knopp, PairContext, SolverConfig};

use rwk_oracles::{
    fd_gradient, lp_transport_uniform, lp_transport_uniform_plan, quadruple_structural_cost,
    random_graph_spec, random_positive_mass, relative_error,
};

fn small_options() -> ArtifactOptions {
    ArtifactOptions {
        feature_mode: FeatureMode::Continuous,
        wl_rounds: 0,
        variation_hops: 1,
        embed_dim: 8,
        diffusion_time: 1.0,
        pairwise: PairwiseMode::ShortestPath,
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let (edges, x) = random_graph_spec(rng, n, 0.5, 3);
    let mut g = Graph::from_edges(n, &edges).unwrap();
    g.set_features(x).unwrap();
    g
}

fn random_context(rng: &mut ChaCha8Rng, config: &SolverConfig) -> (PairContext, usize, usize) {
    let n1 = 3 + (rng.next_u32() % 4) as usize;
    let n2 = 3 + (rng.next_u32() % 4) as usize;
    let g1 = random_graph(rng, n1);
    let g2 = random_graph(rng, n2);
    let opts = small_options();
    let a1 = GraphArtifacts::build(&g1, g1.features(), &opts).unwrap();
    let a2 = GraphArtifacts::build(&g2, g2.features(), &opts).unwrap();
    (pair_context(&a1, &a2, config).unwrap(), n1, n2)
}

use rand::RngCore;

fn dense_config() -> SolverConfig {
    // every term active so each gradient branch is exercised
    SolverConfig {
        beta1: 0.5,
        beta2: 0.5,
        lambda_mu: 0.3,
        lambda_nu: 0.2,
        rho: 0.2,
        lambda_g: 0.5,
        ..SolverConfig::default()
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = dense_config();
    for _ in 0..8 {
        let (ctx, n1, n2) = random_context(&mut rng, &config);
        let gamma = random_positive_mass(&mut rng, n1, n2);

        let grad_f = ctx.grad_f(&gamma);
        let fd_f = fd_gradient(|g| ctx.f_value(g), &gamma, 1e-6);
        assert!(relative_error(&grad_f, &fd_f) <= 1e-5);

        let grad_g = ctx.grad_g(&gamma);
        let fd_g = fd_gradient(|g| ctx.g_value(g), &gamma, 1e-6);
        assert!(relative_error(&grad_g, &fd_g) <= 1e-5);

        let grad_h = ctx.grad_h(&gamma);
        let fd_h = fd_gradient(|g| ctx.h_value(g), &gamma, 1e-6);
        assert!(relative_error(&grad_h, &fd_h) <= 1e-5);

        let grad = ctx.grad_objective(&gamma);
        let fd = fd_gradient(|g| ctx.objective(g), &gamma, 1e-6);
        assert!(relative_error(&grad, &fd) <= 1e-5);
    }
}

#[test]
fn structural_fast_path_matches_quadruple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..10 {
        let n1 = 3 + (rng.next_u32() % 4) as usize;
        let n2 = 3 + (rng.next_u32() % 4) as usize;
        let cp1 = {
            let half = Array2::from_shape_fn((n1, n1), |(i, j)| {
                if i < j { rand::Rng::gen::<f64>(&mut rng) } else { 0.0 }
            });
            &half + &half.t()
        };
        let cp2 = {
            let half = Array2::from_shape_fn((n2, n2), |(i, j)| {
                if i < j { rand::Rng::gen::<f64>(&mut rng) } else { 0.0 }
            });
            &half + &half.t()
        };
        let gamma = random_positive_mass(&mut rng, n1, n2);
        let applied = gw_cost_apply(&cp1, &cp2, &gamma).unwrap();
        let fast: f64 = applied.iter().zip(gamma.iter()).map(|(&a, &g)| a * g).sum();
        let slow = quadruple_structural_cost(&cp1, &cp2, &gamma);
        let denom = slow.abs().max(1e-12);
        assert!(
            ((fast - slow) / denom).abs() <= 1e-10,
            "fast {fast} vs quadruple {slow}"
        );
    }
}

#[test]
fn entropic_plan_approaches_exact_transport_at_low_temperature() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let n = 4 + (rng.next_u32() % 3) as usize;
        let mut cost = Array2::zeros((n, n));
        for v in cost.iter_mut() {
            *v = rand::Rng::gen::<f64>(&mut rng);
        }
        let mu = Array1::from_elem(n, 1.0 / n as f64);
        let nu = Array1::from_elem(n, 1.0 / n as f64);
        let plan = sinkhorn_knopp(&mu, &nu, &cost, 0.005, 5000).unwrap();
        let entropic: f64 = plan
            .matrix
            .iter()
            .zip(cost.iter())
            .map(|(&g, &c)| g * c)
            .sum();
        let exact = lp_transport_uniform(&cost);
        assert!(
            entropic - exact >= -1e-9,
            "entropic {entropic} beat the exact optimum {exact}"
        );
        assert!(
            entropic - exact <= 0.02,
            "entropic {entropic} too far above exact {exact}"
        );
    }
}

#[test]
fn sinkhorn_low_temperature_recovers_the_lp_plan() {
    // antidiagonal-penalizing cost on 2x2: the plan concentrates on the
    // diagonal like the exact solution
    let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
    let mu = Array1::from_elem(2, 0.5);
    let nu = Array1::from_elem(2, 0.5);
    let plan = sinkhorn_knopp(&mu, &nu, &cost, 0.01, 200).unwrap();
    let exact = lp_transport_uniform_plan(&cost);
    let tv: f64 = plan
        .matrix
        .iter()
        .zip(exact.iter())
        .map(|(&a, &b)| (a - b).abs())
        .sum::<f64>()
        * 0.5;
    assert!(tv <= 1e-2, "total variation {tv}");
}

#[test]
fn linear_only_solves_match_exact_transport() {
    // quadratic terms off, smoothness off, vanishing ridge: the solver
    // faces a plain transport program with cost cv + beta1 * cn
    let config = SolverConfig {
        beta2: 0.0,
        lambda_mu: 0.0,
        lambda_nu: 0.0,
        rho: 1e-8,
        sinkhorn_lambda: 0.01,
        sinkhorn_iters: 2000,
        max_iters: 100,
        epsilon: 1e-9,
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..5 {
        let (ctx, _, _) = random_context(&mut rng, &config);
        let res = scg_solve(&ctx).unwrap();
        let cost = &ctx.sim.cv + &(config.beta1 * &ctx.sim.cn);
        let achieved: f64 = res
            .coupling
            .matrix
            .iter()
            .zip(cost.iter())
            .map(|(&g, &c)| g * c)
            .sum();
        let exact = lp_transport_uniform(&cost);
        assert!(exact > 0.05, "degenerate instance, exact = {exact}");
        assert!(
            (achieved - exact).abs() <= 0.01 * exact,
            "achieved {achieved} vs exact {exact}"
        );
    }
}
