//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value obtained by folding a path of counters into a root seed with
//! the SplitMix64 finalizer: `derive_seed(root, &[a, b, c])`. Trials, grid
//! nodes and calibration streams each get their own path, so they can be run
//! in any order (or concurrently) and still reproduce the sequential result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `root`, one SplitMix64 round per component.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &c| {
        splitmix64(acc ^ splitmix64(c.wrapping_add(GOLDEN_GAMMA)))
    })
}

pub fn stream_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
