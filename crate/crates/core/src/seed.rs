//! Seed splitting for replica streams.
//!
//! Replica `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(split_seed(s, r))`, where `split_seed` is the
//! SplitMix64 output function applied to `s + 0x9E3779B97F4A7C15 * (r + 1)`
//! (wrapping arithmetic).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn split_seed(master: u64, replica: u64) -> u64 {
    let mut z = master.wrapping_add(GOLDEN.wrapping_mul(replica.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replica_rng(master: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, replica))
}
