//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from user-supplied base seeds through
//! [`derive`], so every fit, fold split, bootstrap and replicate is
//! reproducible bit for bit and independent of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer: decorrelates structured seed/stream pairs.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The crate's generator of choice: fast, seedable, platform-stable.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_deterministic_and_spreads_streams() {
        assert_eq!(derive(42, 0), derive(42, 0));
        assert_ne!(derive(42, 0), derive(42, 1));
        assert_ne!(derive(42, 0), derive(43, 0));
    }

    #[test]
    fn rng_reproduces_from_seed() {
        let mut a = rng_from(7);
        let mut b = rng_from(7);
        let xs: Vec<f64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
        let mut c = rng_from(8);
        let zs: Vec<f64> = (0..8).map(|_| c.random()).collect();
        assert_ne!(xs, zs);
    }
}
