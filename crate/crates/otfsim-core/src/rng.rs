//! Deterministic named RNG streams.
//!
//! A single master seed is split into independent streams identified by a
//! name ("channel", "noise", "csi", "data") and an optional index path
//! (snr index, trial index, retry attempt). Any component of a run can be
//! reproduced in isolation, and concurrent Monte Carlo trials never share
//! RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG used for every stochastic draw in the library.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a named stream from the master seed.
pub fn stream(master: u64, name: &str) -> Stream {
    indexed_stream(master, name, &[])
}

/// Derive a named stream further keyed by an index path, e.g.
/// `(snr index, trial index, attempt)`.
pub fn indexed_stream(master: u64, name: &str, path: &[u64]) -> Stream {
    let mut state = master;
    splitmix(&mut state);
    for &byte in name.as_bytes() {
        state ^= u64::from(byte);
        splitmix(&mut state);
    }
    for &idx in path {
        state ^= idx;
        splitmix(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    Stream::from_seed(seed)
}
