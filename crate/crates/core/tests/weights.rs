mod common;

use maxmin_core::solvers::WeightVector;
use maxmin_core::weights::{estimate_gradient, minimize_on_simplex, project_simplex, PGDSchedule, SmoothingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sq_norm(x: &[f64]) -> maxmin_core::Result<f64> {
    Ok(x.iter().map(|v| v * v).sum())
}

#[test]
fn projection_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = project_simplex(&x);
        let slow = common::grid_projection3(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-6, "{x:?}: {fast:?} vs {slow:?}");
        }
    }
}

#[test]
fn projection_commutes_with_permutation() {
    let x = [0.9, -0.3, 0.6];
    let p = project_simplex(&x);
    let q = project_simplex(&[x[2], x[0], x[1]]);
    assert_eq!(q, vec![p[2], p[0], p[1]]);
    // Equal coordinates stay equal.
    let e = project_simplex(&[5.0, 5.0, 5.0]);
    assert!(e[0] == e[1] && e[1] == e[2] && (e[0] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn regression_gradient_of_squared_norm_converges() {
    let cfg = SmoothingConfig {
        num_samples: 100_000,
        mu: 0.1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = estimate_gradient(&mut sq_norm, &[1.0, 0.0, 0.0], &cfg, &mut rng).unwrap();
    assert!((g[0] - 2.0).abs() < 0.1 && g[1].abs() < 0.1 && g[2].abs() < 0.1, "{g:?}");
}

#[test]
fn same_seed_gives_same_estimate() {
    let cfg = SmoothingConfig { num_samples: 50, mu: 0.1 };
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        estimate_gradient(&mut sq_norm, &[0.2, 0.3, 0.5], &cfg, &mut rng).unwrap()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn descent_finds_max_min_weights_of_a_linear_family() {
    // f(w) = max(3 w0, 3 w1) has its simplex minimum at (1/2, 1/2).
    let f = |w: &[f64]| Ok((3.0 * w[0]).max(3.0 * w[1]));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = minimize_on_simplex(
        f,
        &WeightVector::new(vec![0.9, 0.1]).unwrap(),
        &SmoothingConfig { num_samples: 20, mu: 0.01 },
        &PGDSchedule {
            initial_rate: 0.05,
            iterations: 2000,
        },
        &mut rng,
    )
    .unwrap();
    assert!((out.best_weights.as_slice()[0] - 0.5).abs() < 0.02, "{:?}", out.best_weights);
    assert!(out.trajectory.iter().all(|r| (r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}
