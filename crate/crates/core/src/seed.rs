//! Deterministic stream derivation for reproducible parallel sampling.
//!
//! Every cascade draws from its own counter-derived ChaCha stream, so a
//! dataset is a pure function of (spec, seed, M) regardless of how the
//! per-cascade work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// RNG for one cascade: a fixed key expanded from `seed`, on the stream
/// numbered by `cascade_id`.
pub fn cascade_rng(seed: u64, cascade_id: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(cascade_id);
    rng
}

/// Derives an independent child seed for a labelled follow-up run, e.g. the
/// re-simulation after applying a mitigation plan.
pub fn child_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then one splitmix round against the seed.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut state = seed ^ h;
    splitmix64(&mut state)
}
