//! Occupancy-measure LP for `max_d min_k sum_{s,a} d(s,a) r_k(s,a)`.
//!
//! Column order: `d(s_1,a_1) .. d(s_p,a_q)`, `delta_1 .. delta_K`, `c+`, `c-`.
//! Rows `0..p` are the flow constraints; rows `p..p+K` read
//! `sum d r_k - delta_k - c+ + c- = 0`. Objective `c+ - c-`. The negated
//! multipliers of the objective rows are the optimal simplex weights.

use serde::{Deserialize, Serialize};

use super::{simplex_solve, LPSolution, LpStatus, StandardFormLP};
use crate::error::{Error, Result};
use crate::momdp::{occupancy_returns, policy_from_occupancy, OccupancyMeasure, StochasticPolicy, TabularMOMDP};

pub fn build_p0_lp(model: &TabularMOMDP) -> StandardFormLP {
    let (p, q, k) = (model.num_states(), model.num_actions(), model.num_objectives());
    let gamma = model.gamma();
    let nd = p * q;
    let (m, n) = (p + k, nd + k + 2);
    let mut a = vec![0.0; m * n];
    for s in 0..p {
        for act in 0..q {
            let col = s * q + act;
            a[s * n + col] += 1.0;
            for &(s2, pr) in model.successors(s, act) {
                a[s2 * n + col] -= gamma * pr;
            }
            for (j, r) in model.reward(s, act).iter().enumerate() {
                a[(p + j) * n + col] = *r;
            }
        }
    }
    for j in 0..k {
        let row = (p + j) * n;
        a[row + nd + j] = -1.0;
        a[row + nd + k] = -1.0;
        a[row + nd + k + 1] = 1.0;
    }
    let mut b = vec![0.0; m];
    b[..p].copy_from_slice(model.initial_dist());
    let mut u = vec![0.0; n];
    u[nd + k] = 1.0;
    u[nd + k + 1] = -1.0;
    StandardFormLP::new(m, n, a, b, u).expect("shapes are consistent by construction")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinSolution {
    /// `min_k J_k` at the optimal occupancy.
    pub value: f64,
    pub occupancy: OccupancyMeasure,
    pub policy: StochasticPolicy,
    /// Optimal simplex weights read from the duals.
    pub weights: Vec<f64>,
    /// `J(pi*)` computed from the occupancy.
    pub returns: Vec<f64>,
    pub lp: LPSolution,
}

fn occupancy_of(model: &TabularMOMDP, x: &[f64]) -> OccupancyMeasure {
    let (p, q) = (model.num_states(), model.num_actions());
    OccupancyMeasure {
        num_states: p,
        num_actions: q,
        values: x[..p * q].iter().map(|v| v.max(0.0)).collect(),
    }
}

fn solve_status(lp: &StandardFormLP) -> Result<LPSolution> {
    let sol = simplex_solve(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Solves the max-min LP, returning value, occupancy, policy and weights.
pub fn maxmin_exact(model: &TabularMOMDP) -> Result<MaxMinSolution> {
    let (p, k) = (model.num_states(), model.num_objectives());
    let lp = build_p0_lp(model);
    let sol = solve_status(&lp)?;
    let occupancy = occupancy_of(model, &sol.x);
    let returns = occupancy_returns(model, &occupancy).0;
    let value = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let weights = (0..k).map(|j| -sol.y[p + j]).collect();
    Ok(MaxMinSolution {
        value,
        policy: policy_from_occupancy(&occupancy)?,
        occupancy,
        weights,
        returns,
        lp: sol,
    })
}

/// Second-stage LP: among occupancies with `J_k >= floor` for all `k`,
/// maximize `sum_k J_k`. Columns `d`, then one surplus per objective.
pub fn build_refinement_lp(model: &TabularMOMDP, floor: f64) -> StandardFormLP {
    let (p, q, k) = (model.num_states(), model.num_actions(), model.num_objectives());
    let gamma = model.gamma();
    let nd = p * q;
    let (m, n) = (p + k, nd + k);
    let mut a = vec![0.0; m * n];
    let mut u = vec![0.0; n];
    for s in 0..p {
        for act in 0..q {
            let col = s * q + act;
            a[s * n + col] += 1.0;
            for &(s2, pr) in model.successors(s, act) {
                a[s2 * n + col] -= gamma * pr;
            }
            for (j, r) in model.reward(s, act).iter().enumerate() {
                a[(p + j) * n + col] = *r;
                u[col] += *r;
            }
        }
    }
    for j in 0..k {
        a[(p + j) * n + nd + j] = -1.0;
    }
    let mut b = vec![floor; m];
    b[..p].copy_from_slice(model.initial_dist());
    StandardFormLP::new(m, n, a, b, u).expect("shapes are consistent by construction")
}

/// Max-min solve followed by the refinement stage, which picks a
/// Pareto-optimal occupancy whose min-return is within `slack` of the
/// optimum. `value` and `weights` are from the first stage.
pub fn maxmin_refined(model: &TabularMOMDP, slack: f64) -> Result<MaxMinSolution> {
    let first = maxmin_exact(model)?;
    let lp = build_refinement_lp(model, first.value - slack);
    let sol = solve_status(&lp)?;
    let occupancy = occupancy_of(model, &sol.x);
    Ok(MaxMinSolution {
        value: first.value,
        policy: policy_from_occupancy(&occupancy)?,
        returns: occupancy_returns(model, &occupancy).0,
        occupancy,
        weights: first.weights,
        lp: first.lp,
    })
}
