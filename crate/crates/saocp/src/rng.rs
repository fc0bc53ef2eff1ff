//! Named random sub-streams derived from a single run seed.
//!
//! Each component draws from its own ChaCha stream, so enabling or disabling
//! one (say, randomized expert sampling) leaves the others bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStream {
    Noise = 1,
    Walk = 2,
    ClassificationU = 3,
    ExpertSampling = 4,
}

pub fn substream(seed: u64, which: SubStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
