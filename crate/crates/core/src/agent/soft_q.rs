//! Tabular soft Q-learning updates, softmax acting, the objective estimate
//! `L_hat`, and the perturbed-weight clones used for weight gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use crate::momdp::dot;
use crate::solvers::{soft_max, softmax_into, SoftQTable};

/// How a perturbed-weight clone of the Q-table is formed before its single
/// update step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloneMode {
    /// Clone is an exact copy of the online and target tables.
    Copy,
    /// Clone is shifted to first order in the weight change using the
    /// per-objective return table: `Q + (w' - w) . Psi`.
    FirstOrder,
}

/// Samples `a ~ softmax(row / temperature)`.
pub fn sample_softmax<R: Rng + ?Sized>(row: &[f64], temperature: f64, rng: &mut R) -> usize {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = row.iter().map(|x| ((x - m) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (a, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return a;
        }
    }
    row.len() - 1
}

/// Behaviour action at `state` with exploration temperature `temperature`.
pub fn act<R: Rng + ?Sized>(q: &SoftQTable, state: usize, temperature: f64, rng: &mut R) -> usize {
    sample_softmax(q.row(state), temperature, rng)
}

/// `L_hat = sum_s mu0(s) alpha log sum_a exp(Q(s, a) / alpha)`.
pub fn estimate_objective(q: &SoftQTable, initial_dist: &[f64]) -> f64 {
    initial_dist
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| p * q.soft_value(s))
        .sum()
}

/// Mean regression target per distinct `(s, a)` in the batch, in order of
/// first appearance. `target` maps a transition to its scalar target.
pub(crate) fn grouped_targets<F>(batch: &[&Transition], num_actions: usize, mut target: F) -> Vec<(usize, f64)>
where
    F: FnMut(&Transition) -> f64,
{
    let mut groups: Vec<(usize, f64, usize)> = Vec::with_capacity(batch.len());
    for t in batch {
        let sa = t.state * num_actions + t.action;
        let y = target(t);
        match groups.iter_mut().find(|g| g.0 == sa) {
            Some(g) => {
                g.1 += y;
                g.2 += 1;
            }
            None => groups.push((sa, y, 1)),
        }
    }
    groups.into_iter().map(|(sa, sum, n)| (sa, sum / n as f64)).collect()
}

/// Soft value of a zero-reward absorbing state: the entropy bonus
/// `alpha log q` collected forever. Terminal transitions bootstrap from it,
/// matching the exact regularized model where terminals are self-loops;
/// using zero instead would make the agent avoid finishing an episode.
pub(crate) fn absorbing_soft_value(alpha: f64, num_actions: usize, gamma: f64) -> f64 {
    alpha * (num_actions as f64).ln() / (1.0 - gamma)
}

/// Soft Bellman target `w.r + gamma * alpha lse(Qbar(s', .) / alpha)`;
/// terminal transitions bootstrap from `absorbing` instead.
pub(crate) fn soft_target(t: &Transition, w: &[f64], gamma: f64, absorbing: f64, next_soft_value: impl FnOnce(usize) -> f64) -> f64 {
    let r = dot(&t.reward, w);
    if t.terminal {
        r + gamma * absorbing
    } else {
        r + gamma * next_soft_value(t.next_state)
    }
}

/// One tabular soft Q-learning step: each `(s, a)` in the batch moves a
/// fraction `lr` toward its mean target. Entries not in the batch are
/// unchanged.
pub fn soft_q_update(q: &SoftQTable, target: &SoftQTable, batch: &[&Transition], w: &[f64], lr: f64, gamma: f64) -> SoftQTable {
    let mut out = q.clone();
    let alpha = q.alpha;
    let absorbing = absorbing_soft_value(alpha, q.num_actions, gamma);
    let groups = grouped_targets(batch, q.num_actions, |t| {
        soft_target(t, w, gamma, absorbing, |s2| soft_max(target.row(s2), alpha))
    });
    for (sa, y) in groups {
        out.values[sa] += lr * (y - out.values[sa]);
    }
    out
}

/// Read access to the learner's online/target Q and return tables.
pub(crate) trait LearnerView {
    fn num_actions(&self) -> usize;
    fn num_objectives(&self) -> usize;
    fn alpha(&self) -> f64;
    fn q(&self, sa: usize) -> f64;
    fn q_target(&self, sa: usize) -> f64;
    /// Online `Psi(s, a)[k]`; zero when no return table is kept.
    fn psi(&self, sa: usize, k: usize) -> f64;
    fn psi_target(&self, sa: usize, k: usize) -> f64;
}

/// Plain materialized tables implementing [`LearnerView`].
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSnapshot {
    pub q: SoftQTable,
    pub q_target: SoftQTable,
    /// Row-major `p x q x K`; empty when no return table is kept.
    pub psi: Vec<f64>,
    pub psi_target: Vec<f64>,
    pub num_objectives: usize,
}

impl LearnerView for LearnerSnapshot {
    fn num_actions(&self) -> usize {
        self.q.num_actions
    }
    fn num_objectives(&self) -> usize {
        self.num_objectives
    }
    fn alpha(&self) -> f64 {
        self.q.alpha
    }
    fn q(&self, sa: usize) -> f64 {
        self.q.values[sa]
    }
    fn q_target(&self, sa: usize) -> f64 {
        self.q_target.values[sa]
    }
    fn psi(&self, sa: usize, k: usize) -> f64 {
        self.psi.get(sa * self.num_objectives + k).copied().unwrap_or(0.0)
    }
    fn psi_target(&self, sa: usize, k: usize) -> f64 {
        self.psi_target.get(sa * self.num_objectives + k).copied().unwrap_or(0.0)
    }
}

fn shift(view: &impl LearnerView, sa: usize, dw: &[f64], target: bool, mode: CloneMode) -> f64 {
    let base = if target { view.q_target(sa) } else { view.q(sa) };
    match mode {
        CloneMode::Copy => base,
        CloneMode::FirstOrder => {
            base + dw
                .iter()
                .enumerate()
                .map(|(k, d)| d * if target { view.psi_target(sa, k) } else { view.psi(sa, k) })
                .sum::<f64>()
        }
    }
}

/// Fully materialized clone for weights `w_new`, after its single update.
pub fn perturbed_clone(
    snap: &LearnerSnapshot,
    batch: &[&Transition],
    w: &[f64],
    w_new: &[f64],
    lr: f64,
    gamma: f64,
    mode: CloneMode,
) -> SoftQTable {
    let dw: Vec<f64> = w_new.iter().zip(w).map(|(a, b)| a - b).collect();
    let mut q = snap.q.clone();
    let mut qt = snap.q_target.clone();
    for sa in 0..q.values.len() {
        q.values[sa] = shift(snap, sa, &dw, false, mode);
        qt.values[sa] = shift(snap, sa, &dw, true, mode);
    }
    soft_q_update(&q, &qt, batch, w_new, lr, gamma)
}

/// `L_hat` of the clone for `w_new`, touching only rows of start states.
/// Equal to `estimate_objective(perturbed_clone(..), mu0)`.
pub(crate) fn clone_objective(
    view: &impl LearnerView,
    support: &[(usize, f64)],
    batch: &[&Transition],
    w: &[f64],
    w_new: &[f64],
    lr: f64,
    gamma: f64,
    mode: CloneMode,
) -> f64 {
    let q = view.num_actions();
    let alpha = view.alpha();
    let dw: Vec<f64> = w_new.iter().zip(w).map(|(a, b)| a - b).collect();
    let mut next_row = vec![0.0; q];
    let relevant: Vec<&Transition> = batch
        .iter()
        .copied()
        .filter(|t| support.iter().any(|&(s, _)| s == t.state))
        .collect();
    let absorbing = absorbing_soft_value(alpha, q, gamma);
    let groups = grouped_targets(&relevant, q, |t| {
        soft_target(t, w_new, gamma, absorbing, |s2| {
            for (a, x) in next_row.iter_mut().enumerate() {
                *x = shift(view, s2 * q + a, &dw, true, mode);
            }
            soft_max(&next_row, alpha)
        })
    });
    let mut row = vec![0.0; q];
    let mut total = 0.0;
    for &(s, p) in support {
        for (a, x) in row.iter_mut().enumerate() {
            *x = shift(view, s * q + a, &dw, false, mode);
        }
        for &(sa, y) in &groups {
            if sa / q == s {
                let a = sa % q;
                row[a] += lr * (y - row[a]);
            }
        }
        total += p * soft_max(&row, alpha);
    }
    total
}

/// Expected-backup targets for the return table under the target softmax
/// policy: `r + gamma * sum_a' pibar(a'|s') Psibar(s', a')`.
pub(crate) fn return_targets(view: &impl LearnerView, batch: &[&Transition], gamma: f64) -> Vec<(usize, Vec<f64>)> {
    let (q, kk) = (view.num_actions(), view.num_objectives());
    let alpha = view.alpha();
    let mut groups: Vec<(usize, Vec<f64>, usize)> = Vec::with_capacity(batch.len());
    let mut qrow = vec![0.0; q];
    let mut pi = vec![0.0; q];
    for t in batch {
        let mut y = t.reward.clone();
        if !t.terminal {
            for (a, x) in qrow.iter_mut().enumerate() {
                *x = view.q_target(t.next_state * q + a);
            }
            softmax_into(&qrow, alpha, &mut pi);
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += gamma * (0..q).map(|a| pi[a] * view.psi_target(t.next_state * q + a, k)).sum::<f64>();
            }
        }
        let sa = t.state * q + t.action;
        match groups.iter_mut().find(|g| g.0 == sa) {
            Some(g) => {
                for (acc, v) in g.1.iter_mut().zip(&y) {
                    *acc += v;
                }
                g.2 += 1;
            }
            None => groups.push((sa, y, 1)),
        }
    }
    debug_assert!(groups.iter().all(|g| g.1.len() == kk));
    groups
        .into_iter()
        .map(|(sa, sum, n)| (sa, sum.into_iter().map(|x| x / n as f64).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn tr(s: usize, a: usize, r: &[f64], s2: usize, terminal: bool) -> Transition {
        Transition {
            state: s,
            action: a,
            reward: r.to_vec(),
            next_state: s2,
            terminal,
        }
    }

    #[test]
    fn update_moves_toward_mean_target() {
        let q = SoftQTable::zeros(2, 2, 0.5);
        let mut tgt = SoftQTable::zeros(2, 2, 0.5);
        tgt.values = vec![0.0, 0.0, 1.0, 1.0];
        let a = tr(0, 1, &[1.0, 0.0], 1, false);
        let b = tr(0, 1, &[0.0, 1.0], 1, true);
        let out = soft_q_update(&q, &tgt, &[&a, &b], &[0.5, 0.5], 0.1, 0.9);
        let v1 = soft_max(&[1.0, 1.0], 0.5);
        // The terminal branch bootstraps from the absorbing value 0.5 ln 2 / 0.1.
        let absorbing = 0.5 * 2f64.ln() / 0.1;
        let mean = (0.5 + 0.9 * v1 + 0.5 + 0.9 * absorbing) / 2.0;
        assert!((out.get(0, 1) - 0.1 * mean).abs() < 1e-15);
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(1, 0), 0.0);
    }

    #[test]
    fn softmax_sampling_frequencies() {
        let mut rng = substream(3, Stream::Agent);
        let row = [0.0, 1.0, 2.0];
        let mut counts = [0usize; 3];
        let n = 60_000;
        for _ in 0..n {
            counts[sample_softmax(&row, 1.0, &mut rng)] += 1;
        }
        let mut p = [0.0; 3];
        softmax_into(&row, 1.0, &mut p);
        for a in 0..3 {
            let se = (p[a] * (1.0 - p[a]) / n as f64).sqrt();
            assert!((counts[a] as f64 / n as f64 - p[a]).abs() < 5.0 * se);
        }
    }

    fn snapshot() -> LearnerSnapshot {
        let mut q = SoftQTable::zeros(3, 2, 0.3);
        q.values = vec![0.1, -0.2, 0.4, 0.0, 0.3, 0.2];
        let mut qt = q.clone();
        qt.values.iter_mut().for_each(|x| *x *= 0.7);
        LearnerSnapshot {
            q,
            q_target: qt,
            psi: (0..12).map(|i| (i as f64 * 0.37).sin()).collect(),
            psi_target: (0..12).map(|i| (i as f64 * 0.11).cos()).collect(),
            num_objectives: 2,
        }
    }

    #[test]
    fn fast_clone_objective_matches_materialized_clone() {
        let snap = snapshot();
        let batch_owned = vec![
            tr(0, 0, &[1.0, 0.0], 1, false),
            tr(0, 1, &[0.0, 2.0], 2, false),
            tr(1, 1, &[0.5, 0.5], 0, false),
            tr(0, 0, &[0.0, 1.0], 2, true),
        ];
        let batch: Vec<&Transition> = batch_owned.iter().collect();
        let mu0 = [0.6, 0.0, 0.4];
        let support = [(0, 0.6), (2, 0.4)];
        let w = [0.5, 0.5];
        let w_new = [0.52, 0.47];
        for mode in [CloneMode::Copy, CloneMode::FirstOrder] {
            let clone = perturbed_clone(&snap, &batch, &w, &w_new, 0.2, 0.9, mode);
            let slow = estimate_objective(&clone, &mu0);
            let fast = clone_objective(&snap, &support, &batch, &w, &w_new, 0.2, 0.9, mode);
            assert!((slow - fast).abs() < 1e-13, "{mode:?}: {slow} vs {fast}");
        }
    }

    #[test]
    fn clones_leave_source_untouched() {
        let snap = snapshot();
        let before = snap.clone();
        let t = tr(0, 0, &[1.0, 0.0], 1, false);
        let _ = perturbed_clone(&snap, &[&t], &[0.5, 0.5], &[0.6, 0.4], 0.5, 0.9, CloneMode::FirstOrder);
        assert_eq!(snap, before);
    }
}
