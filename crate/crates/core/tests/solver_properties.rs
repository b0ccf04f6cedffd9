//! Randomized invariants of the solver stack: feasibility of the entropic
//! subproblem, monotone descent, convexity of the regularizers, and metric
//! properties of the derived distance matrices.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwk_core::embed::wl_labels;
use rwk_core::graph::{shortest_path_matrix, Dataset, Graph};
use rwk_core::pipeline::{pair_context, ArtifactOptions, FeatureMode, GraphArtifacts, PairwiseMode};
use rwk_core::solver::{
    prior_coupling, scg_solve, sinkhorn_knopp, theta_g, SolverConfig,
};

use rwk_oracles::{random_graph_spec, random_positive_mass};

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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sinkhorn_output_is_nearly_feasible(seed in any::<u64>()) {
        // unit-range costs at temperature 0.2: the scaling contraction is
        // strong enough that 200 rounds land at machine precision; stiffer
        // ratios (range/temperature >= 10) genuinely cannot reach 1e-6
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = 2 + (rng.next_u32() % 9) as usize;
        let n2 = 2 + (rng.next_u32() % 9) as usize;
        let mut cost = Array2::zeros((n1, n2));
        for v in cost.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let mu = Array1::from_elem(n1, 1.0 / n1 as f64);
        let nu = Array1::from_elem(n2, 1.0 / n2 as f64);
        let plan = sinkhorn_knopp(&mu, &nu, &cost, 0.2, 200).unwrap();
        prop_assert!(plan.marginal_violation(&mu, &nu) <= 1e-6);
        prop_assert!(plan.matrix.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn descent_is_monotone_and_gap_floor_never_rises(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = 3 + (rng.next_u32() % 4) as usize;
        let n2 = 3 + (rng.next_u32() % 4) as usize;
        let g1 = random_graph(&mut rng, n1);
        let g2 = random_graph(&mut rng, n2);
        let opts = small_options();
        let a1 = GraphArtifacts::build(&g1, g1.features(), &opts).unwrap();
        let a2 = GraphArtifacts::build(&g2, g2.features(), &opts).unwrap();
        let ctx = pair_context(&a1, &a2, &SolverConfig::default()).unwrap();
        let res = scg_solve(&ctx).unwrap();
        for w in res.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "objective rose: {} -> {}", w[0], w[1]);
        }
        let mut floor = f64::INFINITY;
        let mut floors = Vec::new();
        for &g in &res.gap_history {
            floor = floor.min(g);
            floors.push(floor);
        }
        for w in floors.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(res.coupling.matrix.iter().all(|&v| v >= 0.0));
        // the coupling is a convex combination of the exact start and the
        // subproblem outputs, so its violation cannot exceed the worst one
        let violation = res.coupling.marginal_violation(&ctx.mu, &ctx.nu);
        prop_assert!(violation <= res.max_subproblem_violation + 1e-12);
    }

    #[test]
    fn divergence_is_strongly_convex_at_midpoints(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = 2 + (rng.next_u32() % 5) as usize;
        let n2 = 2 + (rng.next_u32() % 5) as usize;
        let a = random_positive_mass(&mut rng, n1, n2);
        let b = random_positive_mass(&mut rng, n1, n2);
        let prior = random_positive_mass(&mut rng, n1, n2);
        let mid = 0.5 * (&a + &b);
        let lhs = theta_g(&mid, &prior, 1e-30);
        let rhs = 0.5 * theta_g(&a, &prior, 1e-30) + 0.5 * theta_g(&b, &prior, 1e-30);
        let sq: f64 = a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum();
        // entries are at most 1, so the divergence is 1-strongly convex
        prop_assert!(lhs <= rhs - 0.125 * sq + 1e-10);
    }

    #[test]
    fn smoothness_terms_are_midpoint_convex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = 3 + (rng.next_u32() % 4) as usize;
        let n2 = 3 + (rng.next_u32() % 4) as usize;
        let g1 = random_graph(&mut rng, n1);
        let g2 = random_graph(&mut rng, n2);
        let opts = small_options();
        let a1 = GraphArtifacts::build(&g1, g1.features(), &opts).unwrap();
        let a2 = GraphArtifacts::build(&g2, g2.features(), &opts).unwrap();
        let config = SolverConfig {
            lambda_mu: 1.0,
            lambda_nu: 1.0,
            beta2: 0.0,
            rho: 1e-12,
            ..SolverConfig::default()
        };
        let ctx = pair_context(&a1, &a2, &config).unwrap();
        let a = random_positive_mass(&mut rng, n1, n2);
        let b = random_positive_mass(&mut rng, n1, n2);
        let mid = 0.5 * (&a + &b);
        // with beta2 = 0 the objective reduces to linear terms plus the
        // quadratic smoothness/ridge block, so midpoint convexity of f
        // checks the curvature of that block
        let lhs = ctx.f_value(&mid);
        let rhs = 0.5 * ctx.f_value(&a) + 0.5 * ctx.f_value(&b);
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn degree_prior_is_a_strictly_positive_distribution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = 2 + (rng.next_u32() % 7) as usize;
        let n2 = 2 + (rng.next_u32() % 7) as usize;
        let (e1, _) = random_graph_spec(&mut rng, n1, 0.5, 1);
        let (e2, _) = random_graph_spec(&mut rng, n2, 0.5, 1);
        let g1 = Graph::from_edges(n1, &e1).unwrap();
        let g2 = Graph::from_edges(n2, &e2).unwrap();
        let prior = prior_coupling(&g1, &g2, 1e-30);
        let total: f64 = prior.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(prior.iter().all(|&v| v > 0.0));
        // rows carry equal mass by construction
        for i in 0..n1 {
            let row: f64 = (0..n2).map(|j| prior[[i, j]]).sum();
            prop_assert!((row - 1.0 / n1 as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn hop_distances_form_a_scaled_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (rng.next_u32() % 7) as usize;
        let (edges, _) = random_graph_spec(&mut rng, n, 0.4, 1);
        let g = Graph::from_edges(n, &edges).unwrap();
        let m = shortest_path_matrix(&g);
        for i in 0..n {
            prop_assert!(m[[i, i]] == 0.0);
            for j in 0..n {
                prop_assert!(m[[i, j]] == m[[j, i]]);
                prop_assert!(m[[i, j] ] >= 0.0 && m[[i, j]] <= 1.0);
                for k in 0..n {
                    prop_assert!(m[[i, j]] <= m[[i, k]] + m[[k, j]] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn label_refinement_only_splits_classes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3 + (rng.next_u32() % 6) as usize;
        let (edges, _) = random_graph_spec(&mut rng, n, 0.5, 1);
        let g = Graph::from_edges(n, &edges).unwrap();
        let dataset = Dataset {
            name: "synthetic".into(),
            graphs: vec![g],
            labels: vec![0],
            class_count: 1,
            node_label_count: 0,
            feature_dim: 0,
        };
        let wl = wl_labels(&dataset, 3);
        for r in 1..wl.labels.len() {
            prop_assert!(wl.alphabet_sizes[r] >= wl.alphabet_sizes[r - 1]);
            for v in 0..n {
                for u in 0..n {
                    // same refined label now implies same label before
                    if wl.labels[r][0][v] == wl.labels[r][0][u] {
                        prop_assert_eq!(wl.labels[r - 1][0][v], wl.labels[r - 1][0][u]);
                    }
                }
            }
        }
    }
}

#[test]
fn identical_graphs_have_near_zero_feature_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, 5);
    let opts = small_options();
    let a = GraphArtifacts::build(&g, g.features(), &opts).unwrap();
    let ctx = pair_context(&a, &a, &SolverConfig::default()).unwrap();
    for i in 0..5 {
        assert!(ctx.sim.cv[[i, i]] == 0.0);
    }
    let res = scg_solve(&ctx).unwrap();
    assert!(res.objective.is_finite());
}
