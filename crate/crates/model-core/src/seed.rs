//! Counter-based seed derivation.
//!
//! A master seed is split into independent streams by hashing
//! `(master, stream, index)` with the SplitMix64 finalizer. The mapping does
//! not depend on call order, so parallel replications draw the same numbers
//! no matter how they are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod stream {
    pub const CASCADE: u64 = 1;
    pub const OU: u64 = 2;
    pub const MARKET: u64 = 3;
    pub const CRASH: u64 = 4;
    pub const WELFARE: u64 = 5;
    pub const THIRTEENF: u64 = 6;
    pub const DISPERSION: u64 = 7;
    pub const RHO_PANEL: u64 = 8;
    pub const HALF_LIFE: u64 = 9;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = mix(master.wrapping_add(GOLDEN));
    let b = mix(a ^ stream.wrapping_mul(GOLDEN).wrapping_add(1));
    mix(b ^ index.wrapping_mul(GOLDEN).wrapping_add(2))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    rng_from(derive_seed(master, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_coordinates_give_distinct_seeds() {
        let mut seen = std::collections::HashSet::new();
        for m in 0..8 {
            for s in 0..8 {
                for i in 0..64 {
                    assert!(seen.insert(derive_seed(m, s, i)));
                }
            }
        }
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(42, 3, 7), derive_seed(42, 3, 7));
        assert_ne!(derive_seed(42, 3, 7), derive_seed(42, 7, 3));
    }
}
