//! Tabular multi-objective MDPs, stochastic policies, occupancy measures and
//! exact policy evaluation.
//!
//! Storage is dense and row-major: `transition[(s * q + a) * p + s']`,
//! `reward[(s * q + a) * k + j]`. A sparse successor list per `(s, a)` is
//! derived once at construction so that backups cost O(nnz).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability rows read from input.
pub const INPUT_PROB_TOL: f64 = 1e-12;
/// Tolerance for quantities produced by computation (policies, weights).
pub const COMPUTED_TOL: f64 = 1e-8;
/// Residual bound guaranteed by the exact linear solves.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMOMDP {
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    gamma: f64,
    transition: Vec<f64>,
    reward: Vec<f64>,
    initial_dist: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl TabularMOMDP {
    /// Builds a model from flat row-major arrays. Only shapes are checked
    /// here; probabilistic invariants are checked by [`validate`].
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_objectives: usize,
        gamma: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let (p, q, k) = (num_states, num_actions, num_objectives);
        if p == 0 || q == 0 || k == 0 {
            return Err(Error::Dimension(format!(
                "states, actions and objectives must be positive (got {p}, {q}, {k})"
            )));
        }
        if transition.len() != p * q * p {
            return Err(Error::Dimension(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                p * q * p
            )));
        }
        if reward.len() != p * q * k {
            return Err(Error::Dimension(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                p * q * k
            )));
        }
        if initial_dist.len() != p {
            return Err(Error::Dimension(format!(
                "initial_dist has {} entries, expected {p}",
                initial_dist.len()
            )));
        }
        let successors = (0..p * q)
            .map(|sa| {
                transition[sa * p..(sa + 1) * p]
                    .iter()
                    .enumerate()
                    .filter(|(_, &pr)| pr != 0.0)
                    .map(|(s2, &pr)| (s2, pr))
                    .collect()
            })
            .collect();
        Ok(Self {
            num_states,
            num_actions,
            num_objectives,
            gamma,
            transition,
            reward,
            initial_dist,
            successors,
        })
    }

    /// Builds a model from nested arrays `[p][q][p]`, `[p][q][K]`, `[p]`.
    pub fn from_nested(gamma: f64, transition: &[Vec<Vec<f64>>], reward: &[Vec<Vec<f64>>], initial_dist: Vec<f64>) -> Result<Self> {
        let p = transition.len();
        let q = transition.first().map_or(0, |r| r.len());
        let k = reward.first().and_then(|r| r.first()).map_or(0, |r| r.len());
        if reward.len() != p {
            return Err(Error::Dimension(format!(
                "reward has {} state rows, transition has {p}",
                reward.len()
            )));
        }
        let mut t = Vec::with_capacity(p * q * p);
        let mut r = Vec::with_capacity(p * q * k);
        for s in 0..p {
            if transition[s].len() != q || reward[s].len() != q {
                return Err(Error::Dimension(format!("state {s} has a ragged action list")));
            }
            for a in 0..q {
                if transition[s][a].len() != p {
                    return Err(Error::Dimension(format!(
                        "transition row (s={s}, a={a}) has {} entries, expected {p}",
                        transition[s][a].len()
                    )));
                }
                if reward[s][a].len() != k {
                    return Err(Error::Dimension(format!(
                        "reward (s={s}, a={a}) has {} entries, expected {k}",
                        reward[s][a].len()
                    )));
                }
                t.extend_from_slice(&transition[s][a]);
                r.extend_from_slice(&reward[s][a]);
            }
        }
        Self::new(p, q, k, gamma, t, r, initial_dist)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let p = self.num_states;
        let sa = s * self.num_actions + a;
        &self.transition[sa * p..(sa + 1) * p]
    }
    pub fn prob(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition_row(s, a)[s2]
    }
    /// Nonzero entries of `P(. | s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.num_actions + a]
    }
    pub fn reward(&self, s: usize, a: usize) -> &[f64] {
        let k = self.num_objectives;
        let sa = s * self.num_actions + a;
        &self.reward[sa * k..(sa + 1) * k]
    }
    pub fn scalarized_reward(&self, s: usize, a: usize, w: &[f64]) -> f64 {
        dot(self.reward(s, a), w)
    }
    /// Largest L1 norm of a reward vector.
    pub fn max_reward_l1(&self) -> f64 {
        self.reward
            .chunks(self.num_objectives)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Same dynamics with objective `k` multiplied by `scales[k]`.
    pub fn with_scaled_rewards(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.num_objectives {
            return Err(Error::Dimension(format!(
                "{} scales for {} objectives",
                scales.len(),
                self.num_objectives
            )));
        }
        let mut out = self.clone();
        for (i, r) in out.reward.iter_mut().enumerate() {
            *r *= scales[i % self.num_objectives];
        }
        Ok(out)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.gamma = gamma;
        out
    }

    pub fn to_document(&self) -> MomdpDocument {
        let (p, q) = (self.num_states, self.num_actions);
        MomdpDocument {
            num_states: p,
            num_actions: q,
            num_objectives: self.num_objectives,
            gamma: self.gamma,
            transition: (0..p)
                .map(|s| (0..q).map(|a| self.transition_row(s, a).to_vec()).collect())
                .collect(),
            reward: (0..p).map(|s| (0..q).map(|a| self.reward(s, a).to_vec()).collect()).collect(),
            initial_dist: self.initial_dist.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MomdpDocument = serde_json::from_str(text)?;
        let model = Self::try_from(doc)?;
        validate(&model)?;
        Ok(model)
    }
}

/// On-disk JSON form of a model. Floats are written in shortest round-trip
/// form, so serialization is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_objectives: usize,
    pub gamma: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
}

impl TryFrom<MomdpDocument> for TabularMOMDP {
    type Error = Error;
    fn try_from(doc: MomdpDocument) -> Result<Self> {
        let m = TabularMOMDP::from_nested(doc.gamma, &doc.transition, &doc.reward, doc.initial_dist)?;
        if m.num_states != doc.num_states || m.num_actions != doc.num_actions || m.num_objectives != doc.num_objectives {
            return Err(Error::Dimension(format!(
                "declared sizes ({}, {}, {}) do not match arrays ({}, {}, {})",
                doc.num_states, doc.num_actions, doc.num_objectives, m.num_states, m.num_actions, m.num_objectives
            )));
        }
        Ok(m)
    }
}

fn check_distribution(row: &[f64], what: impl Fn() -> String) -> Result<()> {
    for (i, &x) in row.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidModel(format!("{} entry {i} is {x}", what())));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > INPUT_PROB_TOL {
        return Err(Error::InvalidModel(format!("{} sums to {sum}", what())));
    }
    Ok(())
}

/// Checks every model invariant; the error names the first offending index.
pub fn validate(model: &TabularMOMDP) -> Result<()> {
    if !(model.gamma >= 0.0 && model.gamma < 1.0) {
        return Err(Error::InvalidModel(format!("gamma must lie in [0, 1), got {}", model.gamma)));
    }
    for s in 0..model.num_states {
        for a in 0..model.num_actions {
            check_distribution(model.transition_row(s, a), || format!("transition row (s={s}, a={a})"))?;
            for (k, r) in model.reward(s, a).iter().enumerate() {
                if !r.is_finite() {
                    return Err(Error::InvalidModel(format!("reward (s={s}, a={a}, k={k}) is {r}")));
                }
            }
        }
    }
    check_distribution(&model.initial_dist, || "initial_dist".to_string())
}

/// Row-stochastic `p x q` table of action probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidPolicy(format!("row {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > COMPUTED_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("state {s} uses action {a} >= {num_actions}")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
    /// Most likely action per state, lowest index on ties.
    pub fn argmax_actions(&self) -> Vec<usize> {
        (0..self.num_states).map(|s| argmax(self.row(s))).collect()
    }
}

/// Discounted state-action occupancy `d(s, a)`, row-major `p x q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub num_states: usize,
    pub num_actions: usize,
    pub values: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-objective expected discounted return `J(pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnVector(pub Vec<f64>);

impl ReturnVector {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn weighted(&self, w: &[f64]) -> f64 {
        dot(&self.0, w)
    }
}

fn check_policy_shape(model: &TabularMOMDP, policy: &StochasticPolicy) -> Result<()> {
    if policy.num_states != model.num_states || policy.num_actions != model.num_actions {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, model is {}x{}",
            policy.num_states, policy.num_actions, model.num_states, model.num_actions
        )));
    }
    Ok(())
}

/// `I - gamma * P_pi` (or its transpose).
fn evaluation_matrix(model: &TabularMOMDP, policy: &StochasticPolicy, transpose: bool) -> DMatrix<f64> {
    let p = model.num_states;
    let mut m = DMatrix::<f64>::identity(p, p);
    for s in 0..p {
        for a in 0..model.num_actions {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for &(s2, pr) in model.successors(s, a) {
                let v = model.gamma * pa * pr;
                if transpose {
                    m[(s2, s)] -= v;
                } else {
                    m[(s, s2)] -= v;
                }
            }
        }
    }
    m
}

/// Solves `m x = rhs` by LU with one round of iterative refinement.
fn solve_checked(m: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let mut x = lu.solve(rhs).ok_or_else(|| Error::Singular("I - gamma P_pi is singular".into()))?;
    let r = rhs - m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let res = (rhs - m * &x).amax();
    let scale = 1.0f64.max(rhs.amax());
    if !res.is_finite() || res > SOLVE_RESIDUAL_TOL * scale {
        return Err(Error::Singular(format!("residual {res} exceeds tolerance")));
    }
    Ok(x)
}

/// Per-objective state values `V_k^pi`, shape `[K][p]`.
pub fn policy_values(model: &TabularMOMDP, policy: &StochasticPolicy) -> Result<Vec<Vec<f64>>> {
    check_policy_shape(model, policy)?;
    let (p, q, kk) = (model.num_states, model.num_actions, model.num_objectives);
    let m = evaluation_matrix(model, policy, false);
    let lu = m.clone().lu();
    let mut out = Vec::with_capacity(kk);
    for k in 0..kk {
        let rhs = DVector::from_fn(p, |s, _| (0..q).map(|a| policy.prob(s, a) * model.reward(s, a)[k]).sum());
        out.push(solve_checked(&m, &lu, &rhs)?.iter().copied().collect());
    }
    Ok(out)
}

/// Exact `J(pi) = sum_s mu0(s) V^pi(s)` per objective.
pub fn policy_return_vector(model: &TabularMOMDP, policy: &StochasticPolicy) -> Result<ReturnVector> {
    let values = policy_values(model, policy)?;
    Ok(ReturnVector(values.iter().map(|v| dot(v, &model.initial_dist)).collect()))
}

/// Discounted occupancy of `pi` under `mu0`; total mass is `1 / (1 - gamma)`.
pub fn occupancy_from_policy(model: &TabularMOMDP, policy: &StochasticPolicy) -> Result<OccupancyMeasure> {
    check_policy_shape(model, policy)?;
    let (p, q) = (model.num_states, model.num_actions);
    let m = evaluation_matrix(model, policy, true);
    let lu = m.clone().lu();
    let rhs = DVector::from_column_slice(&model.initial_dist);
    let ds = solve_checked(&m, &lu, &rhs)?;
    let mut values = vec![0.0; p * q];
    for s in 0..p {
        for a in 0..q {
            values[s * q + a] = ds[s] * policy.prob(s, a);
        }
    }
    Ok(OccupancyMeasure {
        num_states: p,
        num_actions: q,
        values,
    })
}

/// Normalizes `d(s, .)`; states with zero mass get the uniform row.
/// Small negative entries from LP round-off are clamped to zero.
pub fn policy_from_occupancy(d: &OccupancyMeasure) -> Result<StochasticPolicy> {
    let (p, q) = (d.num_states, d.num_actions);
    if d.values.len() != p * q {
        return Err(Error::Dimension(format!(
            "occupancy has {} entries, expected {}",
            d.values.len(),
            p * q
        )));
    }
    let mut probs = Vec::with_capacity(p * q);
    for s in 0..p {
        let row: Vec<f64> = d.values[s * q..(s + 1) * q].iter().map(|x| x.max(0.0)).collect();
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            probs.extend(row.iter().map(|x| x / mass));
        } else {
            probs.extend(std::iter::repeat_n(1.0 / q as f64, q));
        }
    }
    StochasticPolicy::new(p, q, probs)
}

/// Per-state violation of the Bellman flow equations.
pub fn balance_residual(model: &TabularMOMDP, d: &OccupancyMeasure) -> Result<Vec<f64>> {
    let (p, q) = (model.num_states, model.num_actions);
    if d.num_states != p || d.num_actions != q || d.values.len() != p * q {
        return Err(Error::Dimension("occupancy shape does not match model".into()));
    }
    let mut res: Vec<f64> = (0..p)
        .map(|s| d.values[s * q..(s + 1) * q].iter().sum::<f64>() - model.initial_dist[s])
        .collect();
    for s in 0..p {
        for a in 0..q {
            let x = d.get(s, a);
            if x == 0.0 {
                continue;
            }
            for &(s2, pr) in model.successors(s, a) {
                res[s2] -= model.gamma * pr * x;
            }
        }
    }
    Ok(res)
}

/// `sum_{s,a} d(s, a) r(s, a)`, equal to `J(pi_d)`.
pub fn occupancy_returns(model: &TabularMOMDP, d: &OccupancyMeasure) -> ReturnVector {
    let mut out = vec![0.0; model.num_objectives];
    for s in 0..model.num_states {
        for a in 0..model.num_actions {
            let x = d.get(s, a);
            for (o, r) in out.iter_mut().zip(model.reward(s, a)) {
                *o += x * r;
            }
        }
    }
    ReturnVector(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
