//! Seed derivation for independent random streams.
//!
//! Every randomized stage (per-class split shuffles, per-tree bootstrap and
//! feature sampling) draws from its own `ChaCha8Rng`, seeded with
//! `stream_seed(master, stream)`. The derivation is the SplitMix64 output
//! function applied to `master + (stream + 1) * 0x9E3779B97F4A7C15`
//! (wrapping), i.e. the `(stream + 1)`-th output of a SplitMix64 generator
//! whose state starts at `master`:
//!
//! ```text
//! z = master + (stream + 1) * 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! seed = z ^ (z >> 31)
//! ```
//!
//! A stream's randomness depends only on `(master, stream)`, so work can be
//! scheduled on any number of threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tag mixed into the master seed for dataset splitting, keeping split
/// streams disjoint from tree streams that share the same master seed.
pub const SPLIT_DOMAIN: u64 = 0x5350_4C49_5400_0000;

/// Domain tag for per-class subsampling.
pub const SUBSAMPLE_DOMAIN: u64 = 0x5355_4253_4D50_0000;

pub fn stream_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream))
}
