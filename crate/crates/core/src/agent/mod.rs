//! Model-free max-min learner: tabular soft Q-learning interleaved with
//! zeroth-order descent on the objective weights.
//!
//! Each weight iteration draws one minibatch and `N` Gaussian directions,
//! forms a perturbed clone of the Q-table per direction, applies one soft
//! Q-learning step to each clone under its perturbed weights, and regresses
//! the clones' objective estimates on the perturbed weights. The main table
//! is then updated under the new weights.

mod buffer;
mod soft_q;
mod tracked;

pub use buffer::{ReplayBuffer, Transition};
pub use soft_q::{act, estimate_objective, perturbed_clone, sample_softmax, soft_q_update, CloneMode, LearnerSnapshot};

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeSampler, EpisodicEnv};
use crate::error::{Error, Result};
use crate::momdp::StochasticPolicy;
use crate::rng::{substream, Stream};
use crate::solvers::{soft_max, soft_optimal_policy, SoftQTable, WeightVector, MIN_ALPHA};
use crate::weights::{project_simplex, regression_gradient, sample_perturbations, PGDSchedule, SmoothingConfig, TrajectoryRow};
use soft_q::{absorbing_soft_value, clone_objective, grouped_targets, return_targets, soft_target, LearnerView};
use tracked::TrackedTable;

/// Hyperparameters shared by the proposed learner and the baselines.
/// Every field has a default, so JSON configs may override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Discount used by the learner; `None` takes the environment's.
    pub gamma: Option<f64>,
    pub total_steps: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Soft Q-learning temperature.
    pub alpha: f64,
    /// Polyak rate of the target tables, applied after every update.
    pub tau: f64,
    /// Acting temperature decays linearly from start to end over
    /// `explore_fraction * total_steps` steps.
    pub explore_start: f64,
    pub explore_end: f64,
    pub explore_fraction: f64,
    /// Steps at the initial uniform weights with one update per step.
    pub warmup_steps: usize,
    pub main_updates_per_step: usize,
    pub weight_learning: bool,
    /// Weight iterations after warm-up; `None` runs one per remaining step.
    pub weight_iterations: Option<usize>,
    pub num_samples: usize,
    pub mu: f64,
    pub weight_lr: f64,
    pub clone_mode: CloneMode,
    /// Baselines: epsilon-greedy schedule and hard target-copy interval.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub target_update_interval: usize,
    /// Episodes averaged in the running min-return metric.
    pub metrics_window: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            total_steps: 100_000,
            buffer_capacity: 50_000,
            batch_size: 32,
            learning_rate: 0.001,
            alpha: 0.1,
            tau: 0.001,
            explore_start: 5.0,
            explore_end: 0.1,
            explore_fraction: 0.1,
            warmup_steps: 50,
            main_updates_per_step: 3,
            weight_learning: true,
            weight_iterations: None,
            num_samples: 20,
            mu: 0.01,
            weight_lr: 0.01,
            clone_mode: CloneMode::Copy,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            target_update_interval: 500,
            metrics_window: 20,
            seed: 0,
        }
    }
}

impl AgentConfig {
    /// Settings for the Four-Room task. Values span roughly `(1 - gamma)`
    /// per step there, so the default temperature (sized for network
    /// outputs) would swamp them; the table is exact for this deterministic
    /// grid, so full steps and an untracked target are safe. First-order
    /// clones give the weight gradient a signal at a start state whose
    /// rewards are all zero.
    pub fn four_room() -> Self {
        Self {
            total_steps: 150_000,
            learning_rate: 1.0,
            alpha: 0.005,
            tau: 1.0,
            explore_start: 0.1,
            explore_end: 0.05,
            explore_fraction: 0.3,
            clone_mode: CloneMode::FirstOrder,
            ..Self::default()
        }
    }

    pub fn validate(&self, num_objectives: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.total_steps == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("total_steps, batch_size and buffer_capacity must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.alpha >= MIN_ALPHA) {
            return bad(format!("alpha must be at least {MIN_ALPHA}, got {}", self.alpha));
        }
        if !(self.explore_start > 0.0 && self.explore_end > 0.0) {
            return bad("exploration temperatures must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.explore_fraction) {
            return bad("explore_fraction must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon values must lie in [0, 1]".into());
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("gamma must lie in [0, 1), got {g}"));
            }
        }
        if self.target_update_interval == 0 || self.metrics_window == 0 {
            return bad("target_update_interval and metrics_window must be positive".into());
        }
        if self.weight_learning {
            SmoothingConfig {
                num_samples: self.num_samples,
                mu: self.mu,
            }
            .validate(num_objectives)?;
            if !(self.weight_lr > 0.0) {
                return bad(format!("weight_lr must be positive, got {}", self.weight_lr));
            }
        }
        Ok(())
    }

    fn decay_progress(&self, step: usize) -> f64 {
        let horizon = (self.explore_fraction * self.total_steps as f64).round().max(1.0);
        (step as f64 / horizon).min(1.0)
    }

    /// Acting temperature at `step`.
    pub fn exploration_temperature(&self, step: usize) -> f64 {
        let f = self.decay_progress(step);
        self.explore_start + f * (self.explore_end - self.explore_start)
    }

    /// Baseline epsilon at `step` (same decay horizon).
    pub fn epsilon(&self, step: usize) -> f64 {
        let f = self.decay_progress(step);
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }

    pub(crate) fn weight_iteration_count(&self) -> usize {
        if !self.weight_learning {
            return 0;
        }
        let remaining = self.total_steps.saturating_sub(self.warmup_steps);
        self.weight_iterations.unwrap_or(remaining).min(remaining)
    }
}

/// Per-episode training metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Environment steps taken when the episode ended.
    pub step: usize,
    pub episode: usize,
    /// Discounted return per objective.
    pub returns: Vec<f64>,
    /// `min_k` of the mean return over the last `metrics_window` episodes.
    pub running_min_return: f64,
    pub weights: Vec<f64>,
    pub objective_estimate: f64,
    pub temperature: f64,
}

/// CSV with columns `step,episode,return_k..,running_min_return,w_k..,objective_estimate,temperature`.
pub fn write_metrics_csv<W: Write>(records: &[EpisodeRecord], out: &mut W) -> Result<()> {
    let k = records.first().map_or(0, |r| r.returns.len());
    let mut header = vec!["step".to_string(), "episode".to_string()];
    header.extend((0..k).map(|j| format!("return_{j}")));
    header.push("running_min_return".into());
    header.extend((0..k).map(|j| format!("w_{j}")));
    header.extend(["objective_estimate".to_string(), "temperature".to_string()]);
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut f = vec![r.step.to_string(), r.episode.to_string()];
        f.extend(r.returns.iter().map(|x| format!("{x:?}")));
        f.push(format!("{:?}", r.running_min_return));
        f.extend(r.weights.iter().map(|x| format!("{x:?}")));
        f.push(format!("{:?}", r.objective_estimate));
        f.push(format!("{:?}", r.temperature));
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

/// One JSON object per line, same fields as [`EpisodeRecord`].
pub fn write_metrics_jsonl<W: Write>(records: &[EpisodeRecord], out: &mut W) -> Result<()> {
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub q: SoftQTable,
    /// `softmax(Q / alpha)`, the learned policy.
    pub policy: StochasticPolicy,
    pub weights: WeightVector,
    pub trajectory: Vec<TrajectoryRow>,
    pub episodes: Vec<EpisodeRecord>,
    /// Per-objective return table `[s][a][k]` when first-order clones are used.
    pub returns: Option<Vec<f64>>,
}

/// Online/target Q and return tables with lazy Polyak targets.
struct Learner {
    q: TrackedTable,
    psi: Option<TrackedTable>,
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    alpha: f64,
}

impl LearnerView for Learner {
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn num_objectives(&self) -> usize {
        self.num_objectives
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn q(&self, sa: usize) -> f64 {
        self.q.online_at(sa)
    }
    fn q_target(&self, sa: usize) -> f64 {
        self.q.target_at(sa)
    }
    fn psi(&self, sa: usize, k: usize) -> f64 {
        self.psi.as_ref().map_or(0.0, |t| t.online_at(sa * self.num_objectives + k))
    }
    fn psi_target(&self, sa: usize, k: usize) -> f64 {
        self.psi.as_ref().map_or(0.0, |t| t.target_at(sa * self.num_objectives + k))
    }
}

impl Learner {
    fn new(env: &EpisodicEnv, cfg: &AgentConfig, keep_returns: bool) -> Self {
        let (p, q, k) = (env.num_states(), env.num_actions(), env.num_objectives());
        Self {
            q: TrackedTable::filled(p * q, initial_soft_value(cfg, q, env), cfg.tau),
            psi: keep_returns.then(|| TrackedTable::zeros(p * q * k, cfg.tau)),
            num_states: p,
            num_actions: q,
            num_objectives: k,
            alpha: cfg.alpha,
        }
    }

    fn row(&self, s: usize) -> &[f64] {
        &self.q.online()[s * self.num_actions..(s + 1) * self.num_actions]
    }

    fn table(&self) -> SoftQTable {
        SoftQTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            alpha: self.alpha,
            values: self.q.online().to_vec(),
        }
    }

    fn objective_estimate(&self, support: &[(usize, f64)]) -> f64 {
        support.iter().map(|&(s, p)| p * soft_max(self.row(s), self.alpha)).sum()
    }

    /// One soft Q-learning step on `batch` under `w`, then a Polyak tick.
    fn update(&mut self, batch: &[&Transition], w: &[f64], lr: f64, gamma: f64) {
        let q = self.num_actions;
        let mut next = vec![0.0; q];
        let absorbing = absorbing_soft_value(self.alpha, q, gamma);
        let groups = grouped_targets(batch, q, |t| {
            soft_target(t, w, gamma, absorbing, |s2| {
                for (a, x) in next.iter_mut().enumerate() {
                    *x = self.q.target_at(s2 * q + a);
                }
                soft_max(&next, self.alpha)
            })
        });
        let psi_groups = self.psi.is_some().then(|| return_targets(self, batch, gamma));
        for (sa, y) in groups {
            let old = self.q.online_at(sa);
            self.q.set_online(sa, old + lr * (y - old));
        }
        if let (Some(psi), Some(groups)) = (self.psi.as_mut(), psi_groups) {
            let k = self.num_objectives;
            for (sa, y) in groups {
                for (j, yj) in y.iter().enumerate() {
                    let old = psi.online_at(sa * k + j);
                    psi.set_online(sa * k + j, old + lr * (yj - old));
                }
            }
            psi.tick();
        }
        self.q.tick();
    }
}

/// Q starts at the soft value of a zero-reward model. Starting at zero
/// would make every untried action look worse than a tried one by the
/// entropy bonus, which traps exploration in already-visited loops.
fn initial_soft_value(cfg: &AgentConfig, num_actions: usize, env: &EpisodicEnv) -> f64 {
    let gamma = cfg.gamma.unwrap_or(env.model().gamma());
    absorbing_soft_value(cfg.alpha, num_actions, gamma)
}

fn support_of(env: &EpisodicEnv) -> Vec<(usize, f64)> {
    env.model()
        .initial_dist()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| (s, p))
        .collect()
}

/// Episode bookkeeping shared by all learners.
pub(crate) struct EpisodeTracker {
    gamma: f64,
    discount: f64,
    current: Vec<f64>,
    recent: std::collections::VecDeque<Vec<f64>>,
    window: usize,
    pub records: Vec<EpisodeRecord>,
}

impl EpisodeTracker {
    pub(crate) fn new(k: usize, gamma: f64, window: usize) -> Self {
        Self {
            gamma,
            discount: 1.0,
            current: vec![0.0; k],
            recent: Default::default(),
            window,
            records: Vec::new(),
        }
    }

    pub(crate) fn observe(&mut self, reward: &[f64]) {
        for (c, r) in self.current.iter_mut().zip(reward) {
            *c += self.discount * r;
        }
        self.discount *= self.gamma;
    }

    pub(crate) fn finish(&mut self, step: usize, weights: &[f64], objective_estimate: f64, temperature: f64) {
        let k = self.current.len();
        let returns = std::mem::replace(&mut self.current, vec![0.0; k]);
        self.discount = 1.0;
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(returns.clone());
        let n = self.recent.len() as f64;
        let running_min_return = (0..returns.len())
            .map(|k| self.recent.iter().map(|r| r[k]).sum::<f64>() / n)
            .fold(f64::INFINITY, f64::min);
        self.records.push(EpisodeRecord {
            step,
            episode: self.records.len(),
            returns,
            running_min_return,
            weights: weights.to_vec(),
            objective_estimate,
            temperature,
        });
    }
}

fn check_env(env: &EpisodicEnv, cfg: &AgentConfig) -> Result<f64> {
    cfg.validate(env.num_objectives())?;
    Ok(cfg.gamma.unwrap_or(env.model().gamma()))
}

/// Trains the max-min learner. Randomness comes from named substreams of
/// `cfg.seed`: environment, acting and replay sampling, and the weight
/// loop (perturbations and its minibatches) each have their own.
pub fn train(env: &EpisodicEnv, cfg: &AgentConfig) -> Result<TrainOutput> {
    let gamma = check_env(env, cfg)?;
    let k = env.num_objectives();
    let support = support_of(env);
    let weight_iters = cfg.weight_iteration_count();
    let keep_returns = cfg.weight_learning && cfg.clone_mode == CloneMode::FirstOrder;
    let mut learner = Learner::new(env, cfg, keep_returns);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut agent_rng = substream(cfg.seed, Stream::Agent);
    let mut weight_rng = substream(cfg.seed, Stream::Perturbation);
    let mut sampler = EpisodeSampler::new(env, substream(cfg.seed, Stream::Env));
    let mut tracker = EpisodeTracker::new(k, gamma, cfg.metrics_window);
    let schedule = PGDSchedule {
        initial_rate: cfg.weight_lr,
        iterations: weight_iters,
    };
    let mut w = WeightVector::uniform(k).into_vec();
    let mut trajectory = Vec::with_capacity(weight_iters);
    let mut m = 0;

    for step in 0..cfg.total_steps {
        let temperature = cfg.exploration_temperature(step);
        let s = sampler.state();
        let a = sample_softmax(learner.row(s), temperature, &mut agent_rng);
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
            tracker.finish(step + 1, &w, learner.objective_estimate(&support), temperature);
            sampler.reset();
        }
        let updates = if step < cfg.warmup_steps {
            1
        } else {
            if m < weight_iters {
                let batch = buffer.sample(cfg.batch_size, &mut weight_rng);
                let dirs = sample_perturbations(k, cfg.num_samples, &mut weight_rng);
                let points: Vec<Vec<f64>> = dirs
                    .iter()
                    .map(|u| w.iter().zip(u).map(|(w, u)| w + cfg.mu * u).collect())
                    .collect();
                let values: Vec<f64> = points
                    .iter()
                    .map(|wp| clone_objective(&learner, &support, &batch, &w, wp, cfg.learning_rate, gamma, cfg.clone_mode))
                    .collect();
                let g = regression_gradient(&points, &values).map_err(|e| e.in_phase("weight update", Some(cfg.seed)))?;
                let lr = schedule.rate(m);
                trajectory.push(TrajectoryRow {
                    iteration: m,
                    weights: w.clone(),
                    objective: learner.objective_estimate(&support),
                    gradient_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    learning_rate: lr,
                });
                let stepped: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - lr * g).collect();
                w = project_simplex(&stepped);
                m += 1;
            }
            cfg.main_updates_per_step
        };
        for _ in 0..updates {
            let batch = buffer.sample(cfg.batch_size, &mut agent_rng);
            learner.update(&batch, &w, cfg.learning_rate, gamma);
        }
    }
    let q = learner.table();
    Ok(TrainOutput {
        policy: soft_optimal_policy(&q),
        q,
        weights: WeightVector::unconstrained(w),
        trajectory,
        episodes: tracker.records,
        returns: learner.psi.as_ref().map(|t| t.online().to_vec()),
    })
}

/// Plain soft Q-learning at fixed weights, written independently of
/// [`train`]. It consumes randomness identically, so `train` with weight
/// learning disabled reproduces it exactly at uniform weights.
pub fn soft_q_learning(env: &EpisodicEnv, cfg: &AgentConfig, w: &WeightVector) -> Result<TrainOutput> {
    let gamma = check_env(env, cfg)?;
    let (p, nq, k) = (env.num_states(), env.num_actions(), env.num_objectives());
    if w.len() != k {
        return Err(Error::Dimension(format!("{} weights for {k} objectives", w.len())));
    }
    let mut q = TrackedTable::filled(p * nq, initial_soft_value(cfg, nq, env), cfg.tau);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut agent_rng = substream(cfg.seed, Stream::Agent);
    let mut sampler = EpisodeSampler::new(env, substream(cfg.seed, Stream::Env));
    let mut tracker = EpisodeTracker::new(k, gamma, cfg.metrics_window);
    let table = |q: &TrackedTable| SoftQTable {
        num_states: p,
        num_actions: nq,
        alpha: cfg.alpha,
        values: q.online().to_vec(),
    };
    for step in 0..cfg.total_steps {
        let temperature = cfg.exploration_temperature(step);
        let s = sampler.state();
        let a = sample_softmax(&q.online()[s * nq..(s + 1) * nq], temperature, &mut agent_rng);
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
            let est = estimate_objective(&table(&q), env.model().initial_dist());
            tracker.finish(step + 1, w, est, temperature);
            sampler.reset();
        }
        let updates = if step < cfg.warmup_steps { 1 } else { cfg.main_updates_per_step };
        for _ in 0..updates {
            let batch = buffer.sample(cfg.batch_size, &mut agent_rng);
            let current = SoftQTable {
                values: q.target_snapshot(),
                ..table(&q)
            };
            let updated = soft_q_update(&table(&q), &current, &batch, w, cfg.learning_rate, gamma);
            let mut touched: Vec<usize> = Vec::with_capacity(batch.len());
            for t in &batch {
                let sa = t.state * nq + t.action;
                if !touched.contains(&sa) {
                    touched.push(sa);
                    q.set_online(sa, updated.values[sa]);
                }
            }
            q.tick();
        }
    }
    let out = table(&q);
    Ok(TrainOutput {
        policy: soft_optimal_policy(&out),
        q: out,
        weights: w.clone(),
        trajectory: Vec::new(),
        episodes: tracker.records,
        returns: None,
    })
}

/// Samples a greedy-or-uniform action.
pub(crate) fn epsilon_greedy<R: Rng + ?Sized>(greedy: usize, num_actions: usize, epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..num_actions)
    } else {
        greedy
    }
}
