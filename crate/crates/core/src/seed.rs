//! Seed derivation. Every random draw in the toolkit comes from one global
//! seed mixed with a purpose tag and an item id, so results do not depend on
//! processing order or worker count.

use rand_chacha::rand_core::SeedableRng;
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

/// One round of the splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `derive(seed, tag, id)`: FNV-1a over `tag 0x00 id`, xored with the seed,
/// then finalized with splitmix64.
pub fn derive(seed: u64, tag: &str, id: &str) -> u64 {
    let h = fnv1a(FNV_OFFSET, tag.as_bytes());
    let h = fnv1a(h, &[0]);
    let h = fnv1a(h, id.as_bytes());
    mix64(h ^ mix64(seed))
}

/// Sub-seed for the `index`-th item under an already derived seed.
pub fn derive_index(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
