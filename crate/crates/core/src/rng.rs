//! Reproducible random streams.
//!
//! A stream is addressed by `(seed, stream_index)`. Each stream owns two
//! independent ChaCha8 substreams, one for the environment noise `W_e` and
//! one for the branching noise `W_b`, so that an environment can be frozen
//! while the branching noise varies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    fn substream(&self, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index.wrapping_mul(2).wrapping_add(lane));
        rng
    }

    /// Generator for the environment noise.
    pub fn environment(&self) -> ChaCha8Rng {
        self.substream(0)
    }

    /// Generator for the branching noise and any auxiliary draws.
    pub fn branching(&self) -> ChaCha8Rng {
        self.substream(1)
    }
}
