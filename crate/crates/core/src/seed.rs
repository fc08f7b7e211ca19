//! Deterministic seed derivation.
//!
//! Every simulated trial owns an independent random stream whose seed is a
//! pure function of (master seed, algorithm id, delta index, trial index).
//! Seeds therefore do not depend on scheduling order, which makes parallel
//! and serial execution produce identical results.
//!
//! The mixer is SplitMix64 (Steele, Lea & Flood, "Fast splittable
//! pseudorandom number generators", OOPSLA 2014): each argument is absorbed
//! with one SplitMix64 round. It is stable across platforms and releases.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One SplitMix64 output step.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Absorb a word into a running seed.
#[inline]
pub fn mix(state: u64, word: u64) -> u64 {
    splitmix64(state ^ splitmix64(word))
}

/// Seed for one simulated trial.
pub fn trial_seed(master: u64, algorithm: u64, delta_index: u64, trial: u64) -> u64 {
    mix(mix(mix(master, algorithm), delta_index), trial)
}

/// Fresh ChaCha stream for a trial seed.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
