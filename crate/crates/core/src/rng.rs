//! Seeded random streams.
//!
//! Every stochastic step (initialization, shuffling, dropout, pair sampling,
//! splits, bootstrap) draws from its own ChaCha8 stream derived from a run
//! seed, a domain string and a list of indices. Streams are independent of
//! each other, so adding a consumer in one domain never shifts the draws of
//! another, and the output is identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator, recorded in run outputs.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.3), SplitMix64 substream derivation";

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derives a 64-bit key for `(seed, domain, indices)`.
pub fn derive(seed: u64, domain: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(domain.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    h
}

/// Opens the stream for `(seed, domain, indices)`.
pub fn stream(seed: u64, domain: &str, indices: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, domain, indices))
}
