//! Deterministic stream derivation for parallel Monte Carlo.
//!
//! Every independent work item (a path, a grid cell, a bootstrap replicate)
//! gets its own ChaCha8 stream keyed by the run seed plus a list of integer
//! coordinates identifying the item. The derivation is a fixed SplitMix64
//! absorb chain, so results never depend on scheduling, batching, or worker
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Used as the mixing step of the stream derivation.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a ChaCha8 generator for the work item identified by `ids`,
/// rooted at `seed`. Identical `(seed, ids)` always yields an identical
/// stream; distinct coordinate lists yield independent streams.
pub fn stream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908; // sqrt(2) fraction bits
    let mut key = [0u8; 32];
    // Absorb each coordinate, then squeeze four words for the 256-bit key.
    for &id in ids {
        let mut coord = id;
        state ^= splitmix64(&mut coord);
        let _ = splitmix64(&mut state);
    }
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
