//! Independent reference computations for integration tests. Nothing here
//! calls the library's solvers; only model accessors are used.
#![allow(dead_code)]

use maxmin_core::momdp::{StochasticPolicy, TabularMOMDP};

/// Plain hard value iteration with dense loops, iterated to a fixed
/// number of sweeps well past the contraction's precision.
pub fn naive_vi(model: &TabularMOMDP, w: &[f64]) -> Vec<f64> {
    let (p, q) = (model.num_states(), model.num_actions());
    let sweeps = sweeps_for(model.gamma());
    let mut v = vec![0.0; p];
    for _ in 0..sweeps {
        let next: Vec<f64> = (0..p)
            .map(|s| {
                (0..q)
                    .map(|a| {
                        let r: f64 = model.reward(s, a).iter().zip(w).map(|(r, w)| r * w).sum();
                        r + model.gamma() * (0..p).map(|s2| model.prob(s, a, s2) * v[s2]).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        v = next;
    }
    v
}

/// Soft value iteration `v = alpha log sum_a exp(Q/alpha)` with the
/// max-shift written out by hand.
pub fn naive_soft_vi(model: &TabularMOMDP, w: &[f64], alpha: f64) -> Vec<f64> {
    let (p, q) = (model.num_states(), model.num_actions());
    let sweeps = sweeps_for(model.gamma());
    let mut v = vec![0.0; p];
    for _ in 0..sweeps {
        let next: Vec<f64> = (0..p)
            .map(|s| {
                let qs: Vec<f64> = (0..q)
                    .map(|a| {
                        let r: f64 = model.reward(s, a).iter().zip(w).map(|(r, w)| r * w).sum();
                        r + model.gamma() * (0..p).map(|s2| model.prob(s, a, s2) * v[s2]).sum::<f64>()
                    })
                    .collect();
                let m = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + alpha * qs.iter().map(|x| ((x - m) / alpha).exp()).sum::<f64>().ln()
            })
            .collect();
        v = next;
    }
    v
}

/// `J_k(pi)` by iterating the policy's Bellman operator per objective.
pub fn naive_returns(model: &TabularMOMDP, policy: &StochasticPolicy) -> Vec<f64> {
    let (p, q, k) = (model.num_states(), model.num_actions(), model.num_objectives());
    let sweeps = sweeps_for(model.gamma());
    (0..k)
        .map(|j| {
            let mut v = vec![0.0; p];
            for _ in 0..sweeps {
                v = (0..p)
                    .map(|s| {
                        (0..q)
                            .map(|a| {
                                let cont: f64 = (0..p).map(|s2| model.prob(s, a, s2) * v[s2]).sum();
                                policy.prob(s, a) * (model.reward(s, a)[j] + model.gamma() * cont)
                            })
                            .sum()
                    })
                    .collect();
            }
            v.iter().zip(model.initial_dist()).map(|(v, m)| v * m).sum()
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sweeps so that `gamma^n` times a unit-scale value is below 1e-15.
fn sweeps_for(gamma: f64) -> usize {
    ((1e-15f64).ln() / gamma.ln()).ceil() as usize + 10
}

/// Minimum of `mu0 . v*_w` over a uniform grid on the 2-simplex.
pub fn grid_min_k2(model: &TabularMOMDP, points: usize) -> (f64, f64) {
    (0..=points)
        .map(|i| {
            let t = i as f64 / points as f64;
            let v = naive_vi(model, &[t, 1.0 - t]);
            (dot(&v, model.initial_dist()), t)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

/// Nearest point of the 2-simplex in R^3 by grid search with successive
/// zooming. Convexity of the distance makes zooming safe.
pub fn grid_projection3(x: &[f64]) -> Vec<f64> {
    let dist = |a: f64, b: f64| {
        let c = 1.0 - a - b;
        (a - x[0]).powi(2) + (b - x[1]).powi(2) + (c - x[2]).powi(2)
    };
    let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (0.0f64, 1.0f64, 0.0f64, 1.0f64);
    let n = 40;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..40 {
        let (ha, hb) = ((hi_a - lo_a) / n as f64, (hi_b - lo_b) / n as f64);
        for i in 0..=n {
            for j in 0..=n {
                let (a, b) = (lo_a + i as f64 * ha, lo_b + j as f64 * hb);
                if a + b > 1.0 + 1e-15 {
                    continue;
                }
                let d = dist(a, b);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        lo_a = (best.1 - 2.0 * ha).max(0.0);
        hi_a = (best.1 + 2.0 * ha).min(1.0);
        lo_b = (best.2 - 2.0 * hb).max(0.0);
        hi_b = (best.2 + 2.0 * hb).min(1.0);
    }
    vec![best.1, best.2, (1.0 - best.1 - best.2).max(0.0)]
}
