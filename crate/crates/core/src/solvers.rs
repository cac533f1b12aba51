//! Exact dynamic-programming solvers for the scalarized problems.
//!
//! `L(w) = sum_s mu0(s) V*_w(s)` is convex and piecewise-linear in `w`;
//! `J(pi_greedy(w))` is a subgradient. The soft counterpart `L_soft` is
//! smooth with gradient `J(pi_softmax(w))`. [`minimize_exact`] minimizes
//! either over the simplex with Kelley's cutting-plane method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{simplex_solve, LpStatus, StandardFormLP};
use crate::momdp::{argmax, dot, policy_return_vector, StochasticPolicy, TabularMOMDP};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Smallest admissible soft temperature; below it the log-sum-exp is
/// numerically a max and callers should use the hard operator.
pub const MIN_ALPHA: f64 = 1e-6;
const SIMPLEX_TOL: f64 = 1e-10;

/// Weights over objectives. Constructed either checked against the simplex
/// or unconstrained (for perturbed points in smoothing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let w = Self(values);
        if !w.is_on_simplex(SIMPLEX_TOL) {
            return Err(Error::InvalidArgument(format!("weights {:?} are not on the simplex", w.0)));
        }
        Ok(w)
    }
    pub fn unconstrained(values: Vec<f64>) -> Self {
        Self(values)
    }
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }
    pub fn is_on_simplex(&self, tol: f64) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&x| x.is_finite() && x >= -tol) && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

/// Soft action values with their temperature, row-major `p x q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftQTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub alpha: f64,
    pub values: Vec<f64>,
}

impl SoftQTable {
    pub fn zeros(num_states: usize, num_actions: usize, alpha: f64) -> Self {
        Self {
            num_states,
            num_actions,
            alpha,
            values: vec![0.0; num_states * num_actions],
        }
    }
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }
    /// `alpha * log sum_a exp(Q(s, a) / alpha)`.
    pub fn soft_value(&self, s: usize) -> f64 {
        soft_max(self.row(s), self.alpha)
    }
}

/// Which scalarized problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Objective {
    Hard,
    Soft { alpha: f64 },
}

/// Max-subtracted `log sum exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `alpha * log sum exp(x / alpha)`, computed stably.
pub fn soft_max(xs: &[f64], alpha: f64) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + alpha * xs.iter().map(|x| ((x - m) / alpha).exp()).sum::<f64>().ln()
}

/// `softmax(x / alpha)` written into `out`.
pub fn softmax_into(xs: &[f64], alpha: f64, out: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, x) in out.iter_mut().zip(xs) {
        *o = ((x - m) / alpha).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= MIN_ALPHA) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be at least {MIN_ALPHA}, got {alpha}")));
    }
    Ok(())
}

fn check_weights(model: &TabularMOMDP, w: &[f64]) -> Result<()> {
    if w.len() != model.num_objectives() {
        return Err(Error::Dimension(format!(
            "{} weights for {} objectives",
            w.len(),
            model.num_objectives()
        )));
    }
    Ok(())
}

fn check_values(model: &TabularMOMDP, v: &ValueFunction) -> Result<()> {
    if v.0.len() != model.num_states() {
        return Err(Error::Dimension(format!(
            "value function has {} entries for {} states",
            v.0.len(),
            model.num_states()
        )));
    }
    Ok(())
}

/// `Q(s, .) = w . r(s, .) + gamma * sum_s' P(s'|s, .) v(s')`.
fn q_row(model: &TabularMOMDP, w: &[f64], v: &[f64], s: usize, out: &mut [f64]) {
    for (a, o) in out.iter_mut().enumerate() {
        let future: f64 = model.successors(s, a).iter().map(|&(s2, p)| p * v[s2]).sum();
        *o = model.scalarized_reward(s, a, w) + model.gamma() * future;
    }
}

/// Action values of `v` under weights `w`, row-major `p x q`.
pub fn q_values(model: &TabularMOMDP, w: &[f64], v: &ValueFunction) -> Result<Vec<f64>> {
    check_weights(model, w)?;
    check_values(model, v)?;
    let q = model.num_actions();
    let mut out = vec![0.0; model.num_states() * q];
    for s in 0..model.num_states() {
        q_row(model, w, &v.0, s, &mut out[s * q..(s + 1) * q]);
    }
    Ok(out)
}

/// One application of the optimal Bellman operator `T*_w`.
pub fn bellman_backup(model: &TabularMOMDP, w: &[f64], v: &ValueFunction) -> Result<ValueFunction> {
    let q = model.num_actions();
    let qs = q_values(model, w, v)?;
    Ok(ValueFunction(
        qs.chunks(q).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect(),
    ))
}

/// One application of the soft operator, optionally anchored at a policy:
/// `alpha * log sum_a anchor(a|s) exp(Q(s, a) / alpha)`.
pub fn soft_bellman_backup(
    model: &TabularMOMDP,
    w: &[f64],
    v: &ValueFunction,
    alpha: f64,
    anchor: Option<&StochasticPolicy>,
) -> Result<ValueFunction> {
    check_alpha(alpha)?;
    if let Some(pi) = anchor {
        if pi.num_states() != model.num_states() || pi.num_actions() != model.num_actions() {
            return Err(Error::Dimension("anchor policy shape does not match model".into()));
        }
    }
    let q = model.num_actions();
    let qs = q_values(model, w, v)?;
    Ok(ValueFunction(
        qs.chunks(q)
            .enumerate()
            .map(|(s, row)| anchored_soft_max(row, alpha, anchor.map(|pi| pi.row(s))))
            .collect(),
    ))
}

fn anchored_soft_max(row: &[f64], alpha: f64, anchor: Option<&[f64]>) -> f64 {
    match anchor {
        None => soft_max(row, alpha),
        Some(b) => {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + alpha * row.iter().zip(b).map(|(x, p)| p * ((x - m) / alpha).exp()).sum::<f64>().ln()
        }
    }
}

fn iteration_cap(gamma: f64) -> usize {
    if gamma == 0.0 {
        return 2;
    }
    // Enough sweeps to contract any bounded start by 1e-30.
    ((-30.0 * std::f64::consts::LN_10) / gamma.ln()).ceil() as usize + 100
}

/// Iterates a backup until successive iterates differ by at most `tol`
/// in sup-norm; returns the last iterate and the sweep count.
fn iterate<F>(model: &TabularMOMDP, tol: f64, init: Vec<f64>, mut backup_row: F) -> Result<(Vec<f64>, usize)>
where
    F: FnMut(&[f64], usize, &mut [f64]) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (p, q) = (model.num_states(), model.num_actions());
    let mut v = init;
    let mut next = vec![0.0; p];
    let mut scratch = vec![0.0; q];
    for sweep in 1..=iteration_cap(model.gamma()) {
        let mut diff: f64 = 0.0;
        for s in 0..p {
            next[s] = backup_row(&v, s, &mut scratch);
            diff = diff.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if diff <= tol {
            return Ok((v, sweep));
        }
    }
    Err(Error::NoConvergence(format!("value iteration did not reach tolerance {tol}")))
}

/// Fixed point of `T*_w` from `v = 0`.
pub fn value_iteration(model: &TabularMOMDP, w: &[f64], tol: f64) -> Result<ValueFunction> {
    value_iteration_from(model, w, tol, ValueFunction(vec![0.0; model.num_states()]))
}

/// Fixed point of `T*_w` from a warm start.
pub fn value_iteration_from(model: &TabularMOMDP, w: &[f64], tol: f64, init: ValueFunction) -> Result<ValueFunction> {
    check_weights(model, w)?;
    check_values(model, &init)?;
    let (v, _) = iterate(model, tol, init.0, |v, s, row| {
        q_row(model, w, v, s, row);
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    })?;
    Ok(ValueFunction(v))
}

/// Fixed point of the soft operator and the matching soft Q-table.
pub fn soft_value_iteration(model: &TabularMOMDP, w: &[f64], alpha: f64, tol: f64) -> Result<(ValueFunction, SoftQTable)> {
    soft_value_iteration_from(model, w, alpha, tol, None, ValueFunction(vec![0.0; model.num_states()]))
}

pub fn soft_value_iteration_from(
    model: &TabularMOMDP,
    w: &[f64],
    alpha: f64,
    tol: f64,
    anchor: Option<&StochasticPolicy>,
    init: ValueFunction,
) -> Result<(ValueFunction, SoftQTable)> {
    check_alpha(alpha)?;
    check_weights(model, w)?;
    check_values(model, &init)?;
    let (v, _) = iterate(model, tol, init.0, |v, s, row| {
        q_row(model, w, v, s, row);
        anchored_soft_max(row, alpha, anchor.map(|pi| pi.row(s)))
    })?;
    let v = ValueFunction(v);
    let values = q_values(model, w, &v)?;
    let q = SoftQTable {
        num_states: model.num_states(),
        num_actions: model.num_actions(),
        alpha,
        values,
    };
    Ok((v, q))
}

/// Greedy actions of `Q = r_w + gamma P v`, lowest index on ties.
pub fn greedy_actions(model: &TabularMOMDP, w: &[f64], v: &ValueFunction) -> Result<Vec<usize>> {
    let q = model.num_actions();
    Ok(q_values(model, w, v)?.chunks(q).map(argmax).collect())
}

pub fn greedy_policy(model: &TabularMOMDP, w: &[f64], v: &ValueFunction) -> Result<StochasticPolicy> {
    StochasticPolicy::deterministic(&greedy_actions(model, w, v)?, model.num_actions())
}

/// `pi(a|s) = exp((Q(s,a) - V(s)) / alpha)` for the uniform anchor.
pub fn soft_optimal_policy(q: &SoftQTable) -> StochasticPolicy {
    let mut probs = vec![0.0; q.values.len()];
    for s in 0..q.num_states {
        softmax_into(q.row(s), q.alpha, &mut probs[s * q.num_actions..(s + 1) * q.num_actions]);
    }
    StochasticPolicy::new(q.num_states, q.num_actions, probs).expect("softmax rows are normalized")
}

/// `L(w)` or `L_soft(w)`: `sum_s mu0(s) V(s)`.
pub fn scalarized_objective(model: &TabularMOMDP, w: &[f64], objective: Objective, tol: f64) -> Result<f64> {
    let v = match objective {
        Objective::Hard => value_iteration(model, w, tol)?,
        Objective::Soft { alpha } => soft_value_iteration(model, w, alpha, tol)?.0,
    };
    Ok(dot(&v.0, model.initial_dist()))
}

/// Value and (sub)gradient of the scalarized objective at `w`, plus the
/// policy whose return vector is the (sub)gradient.
#[derive(Debug, Clone)]
pub struct ObjectiveEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub policy: StochasticPolicy,
    pub values: ValueFunction,
}

pub fn evaluate_objective(
    model: &TabularMOMDP,
    w: &[f64],
    objective: Objective,
    tol: f64,
    warm: Option<ValueFunction>,
) -> Result<ObjectiveEvaluation> {
    let init = warm.unwrap_or_else(|| ValueFunction(vec![0.0; model.num_states()]));
    let (v, policy) = match objective {
        Objective::Hard => {
            let v = value_iteration_from(model, w, tol, init)?;
            let pi = greedy_policy(model, w, &v)?;
            (v, pi)
        }
        Objective::Soft { alpha } => {
            let (v, q) = soft_value_iteration_from(model, w, alpha, tol, None, init)?;
            (v, soft_optimal_policy(&q))
        }
    };
    let gradient = policy_return_vector(model, &policy)?.0;
    let value = dot(&v.0, model.initial_dist());
    Ok(ObjectiveEvaluation {
        value,
        gradient,
        policy,
        values: v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMinimizer {
    pub weights: WeightVector,
    pub value: f64,
    /// Best upper bound minus cutting-plane lower bound at exit.
    pub gap: f64,
    pub iterations: usize,
    pub policy: StochasticPolicy,
}

#[derive(Debug, Clone, Copy)]
pub struct CuttingPlaneOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub vi_tol: f64,
}

impl Default for CuttingPlaneOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 500,
            vi_tol: 1e-12,
        }
    }
}

/// Minimizes `L` or `L_soft` over the simplex by Kelley's method.
///
/// Cuts are `f(w_i) + g_i . (w - w_i)`. For the hard objective the cut is
/// `w . J(pi_greedy)`, exact, so the method terminates finitely.
pub fn minimize_exact(model: &TabularMOMDP, objective: Objective, opts: CuttingPlaneOptions) -> Result<ExactMinimizer> {
    let k = model.num_objectives();
    let mut w = vec![1.0 / k as f64; k];
    let mut cuts: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, StochasticPolicy)> = None;
    let mut warm: Option<ValueFunction> = None;
    let mut gap = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let eval = evaluate_objective(model, &w, objective, opts.vi_tol, warm.take())?;
        let (f, g) = match objective {
            Objective::Hard => (dot(&w, &eval.gradient), eval.gradient.clone()),
            Objective::Soft { .. } => (eval.value, eval.gradient.clone()),
        };
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, w.clone(), eval.policy.clone()));
        }
        // Cut as an affine function: offset + g . w'.
        cuts.push((f - dot(&g, &w), g));
        warm = Some(eval.values);
        let (next_w, lower) = cutting_plane_master(&cuts, k)?;
        let upper = best.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY);
        gap = upper - lower;
        if gap <= opts.tol * (1.0 + upper.abs()) {
            let (value, weights, policy) = best.expect("at least one iterate");
            return Ok(ExactMinimizer {
                weights: WeightVector::unconstrained(weights),
                value,
                gap,
                iterations: it,
                policy,
            });
        }
        w = next_w;
    }
    let (value, weights, policy) = best.expect("at least one iterate");
    if gap > 1e-6 * (1.0 + value.abs()) {
        return Err(Error::NoConvergence(format!(
            "cutting-plane gap {gap} after {} iterations",
            opts.max_iterations
        )));
    }
    Ok(ExactMinimizer {
        weights: WeightVector::unconstrained(weights),
        value,
        gap,
        iterations: opts.max_iterations,
        policy,
    })
}

/// `min t s.t. t >= c_i + g_i . w, w in simplex` as a standard-form LP with
/// columns `[w (K), t+, t-, slack_i]`.
fn cutting_plane_master(cuts: &[(f64, Vec<f64>)], k: usize) -> Result<(Vec<f64>, f64)> {
    let m = cuts.len() + 1;
    let n = k + 2 + cuts.len();
    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    for (i, (c, g)) in cuts.iter().enumerate() {
        let row = &mut a[i * n..(i + 1) * n];
        for j in 0..k {
            row[j] = -g[j];
        }
        row[k] = 1.0;
        row[k + 1] = -1.0;
        row[k + 2 + i] = -1.0;
        b[i] = *c;
    }
    for j in 0..k {
        a[cuts.len() * n + j] = 1.0;
    }
    b[cuts.len()] = 1.0;
    let mut u = vec![0.0; n];
    u[k] = -1.0;
    u[k + 1] = 1.0;
    let lp = StandardFormLP::new(m, n, a, b, u)?;
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NoConvergence(format!("cutting-plane master LP is {:?}", sol.status)));
    }
    let w = sol.x[..k].iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let total: f64 = w.iter().sum();
    Ok((w.into_iter().map(|x| x / total).collect(), -sol.objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{one_state_env, random_momdp};

    #[test]
    fn one_state_hard_value() {
        let m = one_state_env();
        let v = value_iteration(&m, &[0.5, 0.5], 1e-12).unwrap();
        assert!((v.0[0] - 15.0).abs() < 1e-9);
        let v = value_iteration(&m, &[0.2, 0.8], 1e-12).unwrap();
        assert!((v.0[0] - 24.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_residual_within_tol() {
        let m = random_momdp(3, 6, 3, 2, 0.95).unwrap();
        let w = [0.3, 0.7];
        let v = value_iteration(&m, &w, 1e-10).unwrap();
        let tv = bellman_backup(&m, &w, &v).unwrap();
        let res = tv.0.iter().zip(&v.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-10);
    }

    #[test]
    fn soft_one_state_closed_form() {
        let m = one_state_env();
        let alpha = 0.1;
        let (v, q) = soft_value_iteration(&m, &[0.5, 0.5], alpha, 1e-13).unwrap();
        let expect = alpha / 0.1 * log_sum_exp(&[1.5 / alpha, 1.5 / alpha, 1.0 / alpha]);
        assert!((v.0[0] - expect).abs() < 1e-9);
        let pi = soft_optimal_policy(&q);
        let p1 = 1.0 / (2.0 + (-0.5f64 / alpha).exp());
        assert!((pi.prob(0, 0) - p1).abs() < 1e-9);
    }

    #[test]
    fn soft_approaches_hard_as_alpha_shrinks() {
        let m = random_momdp(9, 5, 3, 2, 0.9).unwrap();
        let w = [0.4, 0.6];
        let hard = scalarized_objective(&m, &w, Objective::Hard, 1e-12).unwrap();
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 0.1, 0.01, 0.001] {
            let soft = scalarized_objective(&m, &w, Objective::Soft { alpha }, 1e-12).unwrap();
            assert!(soft >= hard - 1e-9);
            assert!(soft - hard <= alpha * 3f64.ln() / 0.1 + 1e-9);
            assert!(soft <= prev + 1e-9);
            prev = soft;
        }
    }

    #[test]
    fn anchored_backup_with_uniform_anchor_shifts_by_log_q() {
        let m = random_momdp(2, 4, 3, 2, 0.9).unwrap();
        let v = ValueFunction(vec![0.5; 4]);
        let pi = StochasticPolicy::uniform(4, 3);
        let plain = soft_bellman_backup(&m, &[0.5, 0.5], &v, 0.2, None).unwrap();
        let anchored = soft_bellman_backup(&m, &[0.5, 0.5], &v, 0.2, Some(&pi)).unwrap();
        for (a, b) in plain.0.iter().zip(&anchored.0) {
            assert!((a - b - 0.2 * 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_alpha_and_bad_shapes() {
        let m = one_state_env();
        assert!(soft_value_iteration(&m, &[0.5, 0.5], 1e-9, 1e-8).is_err());
        assert!(matches!(value_iteration(&m, &[1.0], 1e-8), Err(Error::Dimension(_))));
    }

    #[test]
    fn stable_at_extreme_values() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((soft_max(&[-1e6, 0.0], 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn cutting_plane_one_state() {
        let m = one_state_env();
        let sol = minimize_exact(&m, Objective::Hard, CuttingPlaneOptions::default()).unwrap();
        assert!((sol.value - 15.0).abs() < 1e-8);
        assert!((sol.weights[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn weight_vector_checks_simplex() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![0.25, 0.75]).is_ok());
        assert!(!WeightVector::unconstrained(vec![-0.1, 1.1]).is_on_simplex(1e-8));
    }
}
