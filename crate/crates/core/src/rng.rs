//! Counter-style derivation of independent per-pixel random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream for pixel `(row, col)`; depends only on the three inputs, never on
/// scheduling order.
pub fn pixel_rng(seed: u64, row: usize, col: usize) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(seed) ^ row as u64);
    let h = splitmix64(h ^ (col as u64).rotate_left(32));
    ChaCha8Rng::seed_from_u64(h)
}
