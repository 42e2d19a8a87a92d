//! Deterministic seed derivation for realizations and their named streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams within one realization. Methods that share a
/// realization id share every stream, so their outcome draws are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialSampling = 1,
    Outcomes = 2,
    GpRestarts = 3,
    Proposals = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for realization `r` of a study seeded by `master`.
pub fn child_seed(master: u64, r: u64) -> u64 {
    splitmix64(splitmix64(master) ^ r.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
