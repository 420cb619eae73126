//! Seed handling. Every consumer of randomness draws from its own ChaCha
//! stream derived from one 64-bit seed, so adding draws in one module never
//! shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dataset = 1,
    World = 2,
    Init = 3,
    DualPrepass = 4,
    Split = 5,
    Alignment = 6,
    Test = 99,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    stream_with_index(seed, which, 0)
}

/// Sub-stream `index` of `which`; used for per-cell or per-round streams.
pub fn stream_with_index(seed: u64, which: Stream, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((which as u64) << 32) ^ index);
    rng
}
