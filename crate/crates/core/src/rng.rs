//! Counter-based random substreams.
//!
//! Every random draw in a simulation is addressed by `(master seed, stream, counter)`.
//! The stream selects an independent ChaCha stream (one per trial, or per purpose), and
//! the counter positions the keystream at a fixed offset (one block of 2^32 words per
//! step). Results are therefore independent of how trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream reserved for each counter value.
const WORDS_PER_COUNTER: u128 = 1 << 32;

/// Stream offsets for the different consumers of randomness in a run.
pub mod purpose {
    pub const TRIAL: u64 = 0;
    pub const SPLIT: u64 = 1 << 40;
    pub const MONTE_CARLO: u64 = 2 << 40;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Generator positioned at the start of the block reserved for `counter`.
    pub fn at(&self, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(counter as u128 * WORDS_PER_COUNTER);
        rng
    }

    /// Reposition an existing generator of the same key (cheaper than rebuilding it).
    pub fn seek(&self, rng: &mut ChaCha8Rng, counter: u64) {
        rng.set_word_pos(counter as u128 * WORDS_PER_COUNTER);
    }
}
