//! Seeded randomness.
//!
//! Every random draw in the workspace goes through [`seeded`], which returns a
//! ChaCha8 stream. ChaCha8 output is specified bit-for-bit independently of
//! platform and word size, so fixtures generated from a seed are portable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (run id, trial number, ...).
pub fn derived(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
