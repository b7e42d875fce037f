//! Stable seed derivation.
//!
//! Seeds are derived with FNV-1a (64-bit) over a byte encoding of the
//! inputs, followed by the SplitMix64 finalizer. Both are fixed, so a
//! derived seed never changes across platforms, releases or grid edits:
//!
//! ```text
//! h = FNV-1a64( base.to_le_bytes() ‖ for each part: len(part).to_le_bytes() ‖ part )
//! seed = splitmix64_finalize(h)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a base seed together with any number of length-prefixed parts.
pub fn stable_hash(base: u64, parts: &[&[u8]]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &base.to_le_bytes());
    for part in parts {
        h = fnv1a(h, &(part.len() as u64).to_le_bytes());
        h = fnv1a(h, part);
    }
    splitmix64(h)
}

/// Seed for replica `index` drawn from `base`.
pub fn replica_seed(base: u64, index: u32) -> u64 {
    stable_hash(base, &[&index.to_le_bytes()])
}

/// Seed for replica `replica` of the grid point `experiment_id`.
pub fn point_seed(base: u64, experiment_id: &str, replica: u32) -> u64 {
    stable_hash(base, &[experiment_id.as_bytes(), &replica.to_le_bytes()])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
