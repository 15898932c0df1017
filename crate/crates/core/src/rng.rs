//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a short
//! tuple of indices (time, window length, replication, ...), so results do
//! not depend on the order in which independent pieces are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all simulation and resampling.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a key path into a single 64-bit seed.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Opens the stream identified by `(master, key)`.
pub fn stream(master: u64, key: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, key))
}
