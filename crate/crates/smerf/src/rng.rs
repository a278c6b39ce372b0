//! Deterministic per-tree randomness.
//!
//! Each tree draws from its own counter-based stream derived from the master
//! seed and the tree index, so training is bit-reproducible regardless of how
//! trees are scheduled across worker threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One tree's random stream. ChaCha is counter-based, so streams are a pure
/// function of (master seed, tree index).
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

/// Stream for tree `tree_index` under `master_seed`. Distinct indices map to
/// distinct ChaCha streams of the same key, so streams never collide.
pub fn derive_stream(master_seed: u64, tree_index: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(tree_index);
    RngStream(rng)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}
