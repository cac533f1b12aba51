use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::momdp::TabularMOMDP;

fn dirichlet_ones(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|x| x / total).collect()
}

/// Random model: transition rows and `mu0` from Dirichlet(1,...,1),
/// rewards i.i.d. uniform on `[0, 1)`. Same seed gives an identical model.
pub fn random_momdp(seed: u64, num_states: usize, num_actions: usize, num_objectives: usize, gamma: f64) -> Result<TabularMOMDP> {
    if num_states == 0 || num_actions == 0 || num_objectives == 0 {
        return Err(Error::Dimension("random model sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        transition.extend(dirichlet_ones(&mut rng, num_states));
    }
    let reward = (0..num_states * num_actions * num_objectives)
        .map(|_| rng.random::<f64>())
        .collect();
    let initial_dist = dirichlet_ones(&mut rng, num_states);
    TabularMOMDP::new(num_states, num_actions, num_objectives, gamma, transition, reward, initial_dist)
}
