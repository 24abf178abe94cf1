//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose seed
//! is the experiment seed and whose stream id is a hash of an explicit index
//! path (domain, run, segment, term, ...). Any draw can therefore be
//! regenerated in isolation, in any order, on any worker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; keep values stable, they enter the stream hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    FastNoise = 1,
    FastNoiseInit = 2,
    SlowNoise = 3,
    Miscalibration = 4,
    Crosstalk = 5,
    Sequence = 6,
    Compiler = 7,
    Shots = 8,
    InitialState = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an index path into a single 64-bit key.
pub fn mix(domain: Domain, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(domain as u64), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for `(seed, domain, path)`.
pub fn stream(seed: u64, domain: Domain, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(domain, path));
    rng
}

/// Derives a child seed, e.g. for per-worker compiler searches.
pub fn derive_seed(seed: u64, domain: Domain, path: &[u64]) -> u64 {
    splitmix64(seed ^ mix(domain, path))
}
