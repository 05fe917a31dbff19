//! Counter-based RNG streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator addressed
//! by `(master seed, domain, replicate, index)`:
//!
//! * the 256-bit key is four successive SplitMix64 outputs, starting from
//!   `master ^ domain·φ` and absorbing `replicate` after the first output;
//! * the ChaCha stream id is `index` (unit index or bootstrap replicate).
//!
//! A stream depends only on its address, never on which thread runs it or
//! in which order, so results are bit-identical under any schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Observational = 1,
    Counterfactual = 2,
    Bootstrap = 3,
    Experiment = 4,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(master, domain, replicate, index)` address.
pub fn stream(master: u64, domain: Domain, replicate: u64, index: u64) -> ChaCha8Rng {
    let mut state = master ^ (domain as u64).wrapping_mul(GOLDEN);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(&mut state);
        if i == 0 {
            state ^= replicate.wrapping_mul(0xD1B5_4A32_D192_ED03);
        }
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derived 64-bit seed, for handing a sub-experiment its own master seed.
pub fn derive_seed(master: u64, replicate: u64, index: u64) -> u64 {
    let mut state = master ^ (Domain::Experiment as u64).wrapping_mul(GOLDEN);
    splitmix64(&mut state);
    state ^= replicate.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state);
    state ^= index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7);
    splitmix64(&mut state)
}
