mod common;

use maxmin_core::env::{one_state_env, random_momdp};
use maxmin_core::solvers::{
    greedy_actions, minimize_exact, scalarized_objective, soft_value_iteration, value_iteration, CuttingPlaneOptions, Objective,
};
use proptest::prelude::*;

use common::{naive_soft_vi, naive_vi};

fn simplex_point(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[test]
fn library_value_iteration_agrees_with_naive_loops() {
    for seed in 0..5 {
        let model = random_momdp(seed, 6, 3, 2, 0.9).unwrap();
        let w = [0.3, 0.7];
        let v = value_iteration(&model, &w, 1e-12).unwrap();
        let soft = soft_value_iteration(&model, &w, 0.05, 1e-12).unwrap().0;
        for (a, b) in v.0.iter().zip(naive_vi(&model, &w)) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in soft.0.iter().zip(naive_soft_vi(&model, &w, 0.05)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn one_state_soft_minimizer_has_the_closed_form() {
    let alpha: f64 = 0.1;
    let model = one_state_env();
    let opts = CuttingPlaneOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let sol = minimize_exact(&model, Objective::Soft { alpha }, opts).unwrap();
    let expect = alpha / 0.1 * (2.0 * (1.5 / alpha).exp() + (1.0 / alpha).exp()).ln();
    assert!((sol.value - expect).abs() < 1e-4, "{} vs {expect}", sol.value);
    let p = 1.0 / (2.0 + (-1.0 / (2.0 * alpha)).exp());
    assert!((sol.policy.prob(0, 0) - p).abs() < 1e-3);
    assert!((sol.policy.prob(0, 1) - p).abs() < 1e-3);
}

#[test]
fn hard_minimizer_matches_naive_grid() {
    for seed in 40..44 {
        let model = random_momdp(seed, 5, 3, 2, 0.9).unwrap();
        let sol = minimize_exact(&model, Objective::Hard, CuttingPlaneOptions::default()).unwrap();
        let (grid, _) = common::grid_min_k2(&model, 2000);
        let lip = model.max_reward_l1() / 0.1;
        assert!(sol.value <= grid + 1e-8 && grid - sol.value <= lip / 4000.0 + 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scalarized_objectives_are_convex(
        seed in 0u64..10_000,
        a in proptest::collection::vec(0.01f64..1.0, 3),
        b in proptest::collection::vec(0.01f64..1.0, 3),
        lambda in 0.0f64..1.0,
    ) {
        let model = random_momdp(seed, 5, 3, 3, 0.9).unwrap();
        let (w1, w2) = (simplex_point(&a), simplex_point(&b));
        let mid: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        for obj in [Objective::Hard, Objective::Soft { alpha: 0.1 }] {
            let f = |w: &[f64]| scalarized_objective(&model, w, obj, 1e-12).unwrap();
            let lhs = f(&mid);
            let rhs = lambda * f(&w1) + (1.0 - lambda) * f(&w2);
            prop_assert!(lhs <= rhs + 1e-8, "{:?}: {} > {}", obj, lhs, rhs);
        }
    }

    #[test]
    fn hard_values_are_affine_on_constant_greedy_pieces(seed in 0u64..10_000, t0 in 0.0f64..1.0) {
        let model = random_momdp(seed, 5, 3, 2, 0.9).unwrap();
        let h = 1e-4;
        let ts = [t0 * (1.0 - 2.0 * h), t0 * (1.0 - 2.0 * h) + h, t0 * (1.0 - 2.0 * h) + 2.0 * h];
        let vs: Vec<_> = ts.iter().map(|&t| value_iteration(&model, &[t, 1.0 - t], 1e-13).unwrap()).collect();
        let acts: Vec<_> = ts.iter().zip(&vs).map(|(&t, v)| greedy_actions(&model, &[t, 1.0 - t], v).unwrap()).collect();
        if acts[0] == acts[1] && acts[1] == acts[2] {
            for s in 0..model.num_states() {
                let mid = 0.5 * (vs[0].0[s] + vs[2].0[s]);
                prop_assert!((vs[1].0[s] - mid).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn soft_values_are_lipschitz_in_the_weights(
        seed in 0u64..10_000,
        w in proptest::collection::vec(0.0f64..1.0, 2),
        eps in proptest::collection::vec(-0.2f64..0.2, 2),
    ) {
        let model = random_momdp(seed, 4, 3, 2, 0.9).unwrap();
        let w2: Vec<f64> = w.iter().zip(&eps).map(|(a, b)| a + b).collect();
        let v1 = soft_value_iteration(&model, &w, 0.1, 1e-12).unwrap().0;
        let v2 = soft_value_iteration(&model, &w2, 0.1, 1e-12).unwrap().0;
        let diff = v1.0.iter().zip(&v2.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let norm = eps.iter().map(|e| e.abs()).fold(0.0, f64::max);
        prop_assert!(diff <= model.max_reward_l1() / 0.1 * norm + 1e-8);
    }
}

#[test]
fn regularization_gap_is_within_envelope() {
    for seed in 50..53 {
        let model = random_momdp(seed, 4, 3, 2, 0.9).unwrap();
        let hard = minimize_exact(&model, Objective::Hard, CuttingPlaneOptions::default())
            .unwrap()
            .value;
        for alpha in [0.01, 0.1] {
            let soft = minimize_exact(&model, Objective::Soft { alpha }, CuttingPlaneOptions::default())
                .unwrap()
                .value;
            let bound = alpha * 3f64.ln() / 0.1;
            assert!(soft >= hard - 1e-8 && soft - hard <= bound + 1e-8, "seed {seed} alpha {alpha}");
        }
    }
}
