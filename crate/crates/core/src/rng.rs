//! Seeded random streams. Every random draw in the crate comes from a
//! ChaCha8 generator keyed by `(seed, stream)`, so results depend only on the
//! master seed and the logical position of the draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix a domain tag into a seed so unrelated consumers of one master seed
/// never share a stream.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
