//! Named, independent random substreams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Consumers of randomness. Each gets its own ChaCha stream so that adding
/// draws in one component never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Agent = 2,
    Perturbation = 3,
    Evaluation = 4,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
