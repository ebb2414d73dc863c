//! Named random substreams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a string under a seed. Independent of the Rust
/// version, unlike `DefaultHasher`.
pub fn stable_hash(seed: u64, text: &str) -> u64 {
    splitmix(fnv1a(
        text.as_bytes(),
        0xcbf2_9ce4_8422_2325 ^ splitmix(seed),
    ))
}

/// Generator for the substream `name` of `root`.
pub fn substream(root: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(root, name))
}

/// Generator for the `index`-th member of substream `name` (e.g. one per epoch).
pub fn substream_indexed(root: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(stable_hash(root, name) ^ splitmix(index)))
}
