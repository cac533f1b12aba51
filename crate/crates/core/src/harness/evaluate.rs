use serde::{Deserialize, Serialize};

use crate::agent::sample_softmax;
use crate::env::{EpisodeSampler, EpisodicEnv};
use crate::error::{Error, Result};
use crate::momdp::{policy_return_vector, StochasticPolicy};
use crate::rng::{substream, Stream};

/// Monte-Carlo estimate of `J(pi)` with its exact counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episodes: usize,
    /// Mean discounted return per objective over episodes.
    pub mean: Vec<f64>,
    /// Standard error of `mean`.
    pub stderr: Vec<f64>,
    /// `J(pi)` from the model, ignoring the time limit.
    pub exact: Vec<f64>,
    pub min_return: f64,
}

/// Rolls out `policy` for `episodes` episodes (each ends at a terminal or
/// the time limit) and reports discounted returns under `gamma`.
pub fn evaluate_policy(env: &EpisodicEnv, policy: &StochasticPolicy, episodes: usize, gamma: f64, seed: u64) -> Result<EvaluationReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("at least one evaluation episode is required".into()));
    }
    if policy.num_states() != env.num_states() || policy.num_actions() != env.num_actions() {
        return Err(Error::Dimension("policy shape does not match environment".into()));
    }
    let k = env.num_objectives();
    let mut sampler = EpisodeSampler::new(env, substream(seed, Stream::Evaluation));
    let mut action_rng = substream(seed ^ 0x9e37_79b9_7f4a_7c15, Stream::Evaluation);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        if ep > 0 {
            sampler.reset();
        }
        let mut ret = vec![0.0; k];
        let mut discount = 1.0;
        loop {
            let row = policy.row(sampler.state());
            let a = if row.iter().filter(|&&p| p > 0.0).count() == 1 {
                row.iter().position(|&p| p > 0.0).expect("one positive entry")
            } else {
                sample_weighted(row, &mut action_rng)
            };
            let out = sampler.step(a)?;
            for (r, x) in ret.iter_mut().zip(&out.reward) {
                *r += discount * x;
            }
            discount *= gamma;
            if out.done() {
                break;
            }
        }
        samples.push(ret);
    }
    let n = episodes as f64;
    let mean: Vec<f64> = (0..k).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let stderr = (0..k)
        .map(|j| {
            if episodes < 2 {
                return 0.0;
            }
            let var = samples.iter().map(|s| (s[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let exact = policy_return_vector(env.model(), policy)?.0;
    let min_return = mean.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EvaluationReport {
        episodes,
        mean,
        stderr,
        exact,
        min_return,
    })
}

fn sample_weighted<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    // Log-probabilities at temperature one reproduce the distribution.
    let logits: Vec<f64> = probs.iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect();
    sample_softmax(&logits, 1.0, rng)
}
