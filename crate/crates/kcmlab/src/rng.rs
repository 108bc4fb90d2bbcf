//! Deterministic seed derivation.
//!
//! Every stochastic routine in the crate takes explicit 64-bit seeds and
//! derives independent ChaCha streams from them, so replicas are reproducible
//! and order-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; a good 64-bit mixer for seed derivation.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mix a master seed with a sequence of salts (replica index, move index, ...).
pub fn mix(master: u64, salts: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &s in salts {
        acc = splitmix64(acc ^ s.wrapping_mul(0xd134_2543_de82_ef95));
    }
    acc
}

/// Independent ChaCha stream for (master seed, salts).
pub fn stream(master: u64, salts: &[u64]) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    let mut word = mix(master, salts);
    for chunk in seed.chunks_mut(8) {
        word = splitmix64(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
