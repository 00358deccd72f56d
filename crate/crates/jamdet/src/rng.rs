//! Counter-based RNG derivation.
//!
//! Every Monte-Carlo trial gets its own ChaCha stream derived from
//! `(seed, tags...)`, so results do not depend on how trials are scheduled
//! across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent RNG from a base seed and a list of context tags
/// (e.g. `[experiment_id, grid_index, trial_index]`).
pub fn derive_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0xD1B5_4A32_D192_ED03;
    let mut key = [0u8; 32];
    for tag in tags {
        state ^= splitmix64(&mut state) ^ tag.wrapping_mul(0xA24B_AED4_963E_E407);
    }
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Mixes a salt into a seed, giving a derived seed for a sub-experiment.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut state = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut state)
}

/// RNG for a single trial of a named experiment.
pub fn trial_rng(seed: u64, experiment: u64, trial: u64) -> ChaCha8Rng {
    derive_rng(seed, &[experiment, trial])
}

/// Deterministic hash of a byte slice to a uniform value in [0, 1).
///
/// Used by the no-information stub detector: the output is uniform no matter
/// what distribution the input bytes follow.
pub fn hash_to_unit(bytes: &[u8]) -> f64 {
    let mut state = 0x243F_6A88_85A3_08D3u64;
    for &b in bytes {
        state ^= b as u64;
        splitmix64(&mut state);
    }
    let bits = splitmix64(&mut state) >> 11;
    bits as f64 / (1u64 << 53) as f64
}
