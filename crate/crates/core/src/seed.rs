//! Seed derivation. Every trial gets its own ChaCha stream seeded from a hash
//! of (master seed, cell id, trial index), so results never depend on which
//! worker ran which trial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two words.
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b).rotate_left(17))
}

/// Stable 64-bit FNV-1a hash of a key string (platform and release independent).
pub fn key_hash(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn trial_seed(master_seed: u64, cell_id: u64, trial: u64) -> u64 {
    combine(combine(master_seed, cell_id), trial)
}

/// Site-draw stream of one trial.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent side stream of the same trial (stream 0 carries site draws).
pub fn side_stream(rng: &ChaCha8Rng, stream: u64) -> ChaCha8Rng {
    let mut side = ChaCha8Rng::from_seed(rng.get_seed());
    side.set_stream(stream);
    side.set_word_pos(0);
    side
}
