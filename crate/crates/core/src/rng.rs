//! Seeded, independent random streams.
//!
//! Each trial of an experiment draws from its own ChaCha8 stream, selected
//! from the master seed by a tuple of indices. Streams do not depend on the
//! order in which trials are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `parts` of `master`. Distinct `parts` give independent streams.
pub fn stream(master: u64, parts: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(derive_seed(0x9e37_79b9_7f4a_7c15, parts));
    rng
}

/// Folds indices into a 64-bit seed with splitmix64 mixing.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for &p in parts {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
