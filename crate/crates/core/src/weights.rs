//! Zeroth-order projected gradient descent on the weight simplex.
//!
//! The gradient of a smoothed objective is the least-squares slope of
//! values observed at Gaussian-perturbed points `w + mu u_i`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub num_samples: usize,
    pub mu: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { num_samples: 20, mu: 0.01 }
    }
}

impl SmoothingConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.num_samples < dim + 1 {
            return Err(Error::RankDeficient(format!(
                "{} samples cannot determine a {dim}-dimensional slope",
                self.num_samples
            )));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "smoothing radius must be positive, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Learning rate `l_m = initial_rate / sqrt(m + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGDSchedule {
    pub initial_rate: f64,
    pub iterations: usize,
}

impl Default for PGDSchedule {
    fn default() -> Self {
        Self {
            initial_rate: 0.01,
            iterations: 1000,
        }
    }
}

impl PGDSchedule {
    pub fn rate(&self, m: usize) -> f64 {
        self.initial_rate / ((m + 1) as f64).sqrt()
    }
}

/// `n` i.i.d. standard normal directions in `R^k`.
pub fn sample_perturbations<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Least-squares slope `a` minimizing `sum_i (a.(x_i - xbar) - (v_i - vbar))^2`.
pub fn regression_gradient(points: &[Vec<f64>], values: &[f64]) -> Result<Vec<f64>> {
    let n = points.len();
    if n != values.len() {
        return Err(Error::Dimension(format!("{n} points but {} values", values.len())));
    }
    let k = points.first().map_or(0, |p| p.len());
    if k == 0 || n < k + 1 {
        return Err(Error::RankDeficient(format!("{n} points in dimension {k}")));
    }
    if points.iter().any(|p| p.len() != k) {
        return Err(Error::Dimension("points have inconsistent dimension".into()));
    }
    let mean: Vec<f64> = (0..k).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
    let vbar = values.iter().sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, k, |i, j| points[i][j] - mean[j]);
    let y = DVector::from_fn(n, |i, _| values[i] - vbar);
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(Error::RankDeficient(format!(
            "centered design has singular values in [{smin:e}, {smax:e}]"
        )));
    }
    let a = svd.solve(&y, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    Ok(a.iter().copied().collect())
}

/// Euclidean projection onto the probability simplex (sort-threshold).
///
/// Points already on the simplex up to rounding are returned unchanged, so
/// projection is exactly idempotent.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    if x.iter().all(|&v| v >= 0.0) && (total - 1.0).abs() <= 4.0 * f64::EPSILON * x.len() as f64 {
        return x.to_vec();
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// One smoothed-gradient estimate of `f` at `w`: sample directions,
/// evaluate `f(w + mu u_i)`, regress.
pub fn estimate_gradient<F, R>(f: &mut F, w: &[f64], cfg: &SmoothingConfig, rng: &mut R) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    cfg.validate(w.len())?;
    let dirs = sample_perturbations(w.len(), cfg.num_samples, rng);
    let points: Vec<Vec<f64>> = dirs
        .iter()
        .map(|u| w.iter().zip(u).map(|(w, u)| w + cfg.mu * u).collect())
        .collect();
    let values = points.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
    regression_gradient(&points, &values)
}

/// One row of the optimizer trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexMinimization {
    pub best_weights: WeightVector,
    pub best_value: f64,
    pub final_weights: WeightVector,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Projected zeroth-order descent; returns the best evaluated iterate.
pub fn minimize_on_simplex<F, R>(
    mut f: F,
    w0: &WeightVector,
    cfg: &SmoothingConfig,
    schedule: &PGDSchedule,
    rng: &mut R,
) -> Result<SimplexMinimization>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if !w0.is_on_simplex(1e-10) {
        return Err(Error::InvalidArgument("initial weights must lie on the simplex".into()));
    }
    cfg.validate(w0.len())?;
    let mut w = w0.to_vec();
    let mut trajectory = Vec::with_capacity(schedule.iterations + 1);
    let mut best = (f64::INFINITY, w.clone());
    for m in 0..schedule.iterations {
        let value = f(&w)?;
        if value < best.0 {
            best = (value, w.clone());
        }
        let g = estimate_gradient(&mut f, &w, cfg, rng)?;
        let lr = schedule.rate(m);
        trajectory.push(TrajectoryRow {
            iteration: m,
            weights: w.clone(),
            objective: value,
            gradient_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            learning_rate: lr,
        });
        let step: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - lr * g).collect();
        w = project_simplex(&step);
    }
    let value = f(&w)?;
    if value < best.0 {
        best = (value, w.clone());
    }
    trajectory.push(TrajectoryRow {
        iteration: schedule.iterations,
        weights: w.clone(),
        objective: value,
        gradient_norm: f64::NAN,
        learning_rate: f64::NAN,
    });
    Ok(SimplexMinimization {
        best_weights: WeightVector::unconstrained(best.1),
        best_value: best.0,
        final_weights: WeightVector::unconstrained(w),
        trajectory,
    })
}

/// CSV: `iteration,w_0..w_{K-1},objective,gradient_norm,learning_rate`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: &mut W) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.weights.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..k).map(|j| format!("w_{j}")));
    header.extend(["objective", "gradient_norm", "learning_rate"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![r.iteration.to_string()];
        fields.extend(r.weights.iter().map(|w| format!("{w:?}")));
        fields.extend([r.objective, r.gradient_norm, r.learning_rate].map(|x| format!("{x:?}")));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
