//! Seed derivation for independent, order-free random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream keyed by the
//! user seed plus a short path of integers (draw index, class index, epoch...),
//! so results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_VIEWS: u64 = 0x7669_6577;
pub const TAG_SIMILAR: u64 = 0x7369_6d69;
pub const TAG_DIVERSE: u64 = 0x6469_7665;
pub const TAG_RANDOM: u64 = 0x7261_6e64;
pub const TAG_EPOCH: u64 = 0x6570_6f63;
pub const TAG_INIT: u64 = 0x696e_6974;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a key path into a single 64-bit value.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mixed = derive_seed(seed, keys);
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(mixed.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
