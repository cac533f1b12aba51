//! Benchmark environments and the episodic sampling wrapper used by the
//! model-free learners.

mod four_room;
mod one_state;
mod random;

pub use four_room::{four_room_env, FourRoomConfig, FourRoomGrid, ItemPlacement, ItemType};
pub use one_state::{one_state_env, one_state_env_with_gamma, ONE_STATE_GAMMA};
pub use random::random_momdp;

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::momdp::{validate, TabularMOMDP};

/// A tabular model with a time limit and a set of absorbing terminal states.
///
/// Invariant: every terminal state self-loops under every action with zero
/// reward, so the exact solvers and the samplers agree on its value.
#[derive(Debug, Clone)]
pub struct EpisodicEnv {
    model: Arc<TabularMOMDP>,
    max_episode_steps: usize,
    terminal: Vec<bool>,
}

impl EpisodicEnv {
    pub fn new(model: TabularMOMDP, max_episode_steps: usize, terminal_states: &[usize]) -> Result<Self> {
        validate(&model)?;
        if max_episode_steps == 0 {
            return Err(Error::InvalidArgument("max_episode_steps must be positive".into()));
        }
        let mut terminal = vec![false; model.num_states()];
        for &s in terminal_states {
            if s >= model.num_states() {
                return Err(Error::InvalidArgument(format!("terminal state {s} out of range")));
            }
            for a in 0..model.num_actions() {
                if model.prob(s, a, s) != 1.0 || model.reward(s, a).iter().any(|&r| r != 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "terminal state {s} is not a zero-reward self-loop under action {a}"
                    )));
                }
            }
            terminal[s] = true;
        }
        Ok(Self {
            model: Arc::new(model),
            max_episode_steps,
            terminal,
        })
    }

    pub fn model(&self) -> &TabularMOMDP {
        &self.model
    }
    pub fn shared_model(&self) -> Arc<TabularMOMDP> {
        Arc::clone(&self.model)
    }
    pub fn max_episode_steps(&self) -> usize {
        self.max_episode_steps
    }
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }
    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.terminal.len()).filter(|&s| self.terminal[s]).collect()
    }
    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }
    pub fn num_actions(&self) -> usize {
        self.model.num_actions()
    }
    pub fn num_objectives(&self) -> usize {
        self.model.num_objectives()
    }

    /// Draws a start state from `mu0`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.model.initial_dist().iter().copied().enumerate().filter(|(_, p)| *p > 0.0), rng)
    }
}

/// Result of one environment transition. `terminal` marks arrival in an
/// absorbing state (no bootstrapping); `truncated` marks the time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

fn sample_index<R: Rng + ?Sized>(items: impl Iterator<Item = (usize, f64)>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in items {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// One transition `s' ~ P(.|s,a)`, reward `r(s,a)`. The time limit is
/// tracked by [`EpisodeSampler`], so `truncated` is always false here.
pub fn env_step<R: Rng + ?Sized>(env: &EpisodicEnv, state: usize, action: usize, rng: &mut R) -> Result<StepOutcome> {
    let m = env.model();
    if state >= m.num_states() || action >= m.num_actions() {
        return Err(Error::InvalidArgument(format!(
            "state {state} / action {action} out of range ({}, {})",
            m.num_states(),
            m.num_actions()
        )));
    }
    let next_state = sample_index(m.successors(state, action).iter().copied(), rng);
    Ok(StepOutcome {
        next_state,
        reward: m.reward(state, action).to_vec(),
        terminal: env.is_terminal(next_state),
        truncated: false,
    })
}

/// Stateful episode runner enforcing the time limit.
#[derive(Debug)]
pub struct EpisodeSampler<'a, R: Rng> {
    env: &'a EpisodicEnv,
    rng: R,
    state: usize,
    steps: usize,
}

impl<'a, R: Rng> EpisodeSampler<'a, R> {
    pub fn new(env: &'a EpisodicEnv, mut rng: R) -> Self {
        let state = env.sample_initial(&mut rng);
        Self { env, rng, state, steps: 0 }
    }

    pub fn reset(&mut self) -> usize {
        self.state = self.env.sample_initial(&mut self.rng);
        self.steps = 0;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let mut out = env_step(self.env, self.state, action, &mut self.rng)?;
        self.steps += 1;
        out.truncated = !out.terminal && self.steps >= self.env.max_episode_steps;
        self.state = out.next_state;
        Ok(out)
    }
}
