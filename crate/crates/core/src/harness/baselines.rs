//! Comparison learners: utilitarian Q-learning on the mean reward and
//! vector-valued Q-learning with a greedy max-min backup.

use serde::{Deserialize, Serialize};

use crate::agent::{epsilon_greedy, AgentConfig, EpisodeRecord, EpisodeTracker, ReplayBuffer, Transition};
use crate::env::{EpisodeSampler, EpisodicEnv};
use crate::error::Result;
use crate::momdp::{argmax, StochasticPolicy};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    /// Greedy deterministic policy of the learned table.
    pub policy: StochasticPolicy,
    pub episodes: Vec<EpisodeRecord>,
}

/// Vector-valued action values, row-major `p x q x K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorQTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_objectives: usize,
    pub values: Vec<f64>,
}

impl VectorQTable {
    pub fn zeros(num_states: usize, num_actions: usize, num_objectives: usize) -> Self {
        Self {
            num_states,
            num_actions,
            num_objectives,
            values: vec![0.0; num_states * num_actions * num_objectives],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.num_actions + a) * self.num_objectives;
        &self.values[i..i + self.num_objectives]
    }

    /// `argmax_a min_k Q_k(s, a)`, lowest index on ties.
    pub fn greedy(&self, s: usize) -> usize {
        let mins: Vec<f64> = (0..self.num_actions)
            .map(|a| self.get(s, a).iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        argmax(&mins)
    }
}

/// Vector backup: `a' = argmax_a' min_k (r_k + gamma Qbar_k(s', a'))`,
/// target `r + gamma Qbar(s', a')`; terminal transitions do not bootstrap.
pub fn mdqn_backup(q: &VectorQTable, target: &VectorQTable, batch: &[&Transition], gamma: f64, lr: f64) -> VectorQTable {
    let mut out = q.clone();
    mdqn_backup_in_place(&mut out, target, batch, gamma, lr);
    out
}

fn mdqn_backup_in_place(out: &mut VectorQTable, target: &VectorQTable, batch: &[&Transition], gamma: f64, lr: f64) {
    let (nq, k) = (out.num_actions, out.num_objectives);
    let mut groups: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    for t in batch {
        let y: Vec<f64> = if t.terminal {
            t.reward.clone()
        } else {
            let scores: Vec<f64> = (0..nq)
                .map(|a2| {
                    t.reward
                        .iter()
                        .zip(target.get(t.next_state, a2))
                        .map(|(r, v)| r + gamma * v)
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let a2 = argmax(&scores);
            t.reward
                .iter()
                .zip(target.get(t.next_state, a2))
                .map(|(r, v)| r + gamma * v)
                .collect()
        };
        let sa = t.state * nq + t.action;
        match groups.iter_mut().find(|g| g.0 == sa) {
            Some(g) => {
                g.1.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                g.2 += 1;
            }
            None => groups.push((sa, y, 1)),
        }
    }
    for (sa, sum, n) in groups {
        for j in 0..k {
            let v = &mut out.values[sa * k + j];
            *v += lr * (sum[j] / n as f64 - *v);
        }
    }
}

/// Scalar hard backup on the mean reward.
fn utilitarian_backup(q: &mut [f64], target: &[f64], nq: usize, batch: &[&Transition], gamma: f64, lr: f64) {
    let mut groups: Vec<(usize, f64, usize)> = Vec::new();
    for t in batch {
        let r = t.reward.iter().sum::<f64>() / t.reward.len() as f64;
        let y = if t.terminal {
            r
        } else {
            let row = &target[t.next_state * nq..(t.next_state + 1) * nq];
            r + gamma * row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let sa = t.state * nq + t.action;
        match groups.iter_mut().find(|g| g.0 == sa) {
            Some(g) => {
                g.1 += y;
                g.2 += 1;
            }
            None => groups.push((sa, y, 1)),
        }
    }
    for (sa, sum, n) in groups {
        q[sa] += lr * (sum / n as f64 - q[sa]);
    }
}

/// Epsilon-greedy Q-learning loop shared by both baselines; the update
/// schedule and budget match [`crate::agent::train`].
fn run_loop<G, U>(
    env: &EpisodicEnv,
    cfg: &AgentConfig,
    mut greedy: G,
    mut update: U,
    mut sync_target: impl FnMut(),
) -> Result<Vec<EpisodeRecord>>
where
    G: FnMut(usize) -> usize,
    U: FnMut(&[&Transition]),
{
    cfg.validate(env.num_objectives())?;
    let gamma = cfg.gamma.unwrap_or(env.model().gamma());
    let k = env.num_objectives();
    let w = vec![1.0 / k as f64; k];
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut agent_rng = substream(cfg.seed, Stream::Agent);
    let mut sampler = EpisodeSampler::new(env, substream(cfg.seed, Stream::Env));
    let mut tracker = EpisodeTracker::new(k, gamma, cfg.metrics_window);
    for step in 0..cfg.total_steps {
        let eps = cfg.epsilon(step);
        let s = sampler.state();
        let a = epsilon_greedy(greedy(s), env.num_actions(), eps, &mut agent_rng);
        let out = sampler.step(a)?;
        tracker.observe(&out.reward);
        let done = out.done();
        buffer.push(Transition {
            state: s,
            action: a,
            reward: out.reward,
            next_state: out.next_state,
            terminal: out.terminal,
        });
        if done {
            tracker.finish(step + 1, &w, f64::NAN, eps);
            sampler.reset();
        }
        let updates = if step < cfg.warmup_steps { 1 } else { cfg.main_updates_per_step };
        for _ in 0..updates {
            let batch = buffer.sample(cfg.batch_size, &mut agent_rng);
            update(&batch);
        }
        if (step + 1) % cfg.target_update_interval == 0 {
            sync_target();
        }
    }
    Ok(tracker.records)
}

/// Q-learning on `mean_k r_k` with a periodically copied target table.
pub fn utilitarian_train(env: &EpisodicEnv, cfg: &AgentConfig) -> Result<BaselineOutput> {
    let (p, nq) = (env.num_states(), env.num_actions());
    let gamma = cfg.gamma.unwrap_or(env.model().gamma());
    let q = std::cell::RefCell::new(vec![0.0; p * nq]);
    let target = std::cell::RefCell::new(vec![0.0; p * nq]);
    let episodes = run_loop(
        env,
        cfg,
        |s| argmax(&q.borrow()[s * nq..(s + 1) * nq]),
        |batch| utilitarian_backup(&mut q.borrow_mut(), &target.borrow(), nq, batch, gamma, cfg.learning_rate),
        || target.borrow_mut().copy_from_slice(&q.borrow()),
    )?;
    let q = q.into_inner();
    let actions: Vec<usize> = (0..p).map(|s| argmax(&q[s * nq..(s + 1) * nq])).collect();
    Ok(BaselineOutput {
        policy: StochasticPolicy::deterministic(&actions, nq)?,
        episodes,
    })
}

/// Vector Q-learning with the greedy max-min backup of [`mdqn_backup`].
pub fn mdqn_train(env: &EpisodicEnv, cfg: &AgentConfig) -> Result<(BaselineOutput, VectorQTable)> {
    let (p, nq, k) = (env.num_states(), env.num_actions(), env.num_objectives());
    let gamma = cfg.gamma.unwrap_or(env.model().gamma());
    let q = std::cell::RefCell::new(VectorQTable::zeros(p, nq, k));
    let target = std::cell::RefCell::new(VectorQTable::zeros(p, nq, k));
    let episodes = run_loop(
        env,
        cfg,
        |s| q.borrow().greedy(s),
        |batch| mdqn_backup_in_place(&mut q.borrow_mut(), &target.borrow(), batch, gamma, cfg.learning_rate),
        || target.borrow_mut().values.copy_from_slice(&q.borrow().values),
    )?;
    let q = q.into_inner();
    let actions: Vec<usize> = (0..p).map(|s| q.greedy(s)).collect();
    Ok((
        BaselineOutput {
            policy: StochasticPolicy::deterministic(&actions, nq)?,
            episodes,
        },
        q,
    ))
}
