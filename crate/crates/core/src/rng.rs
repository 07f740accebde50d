//! Seeded, splittable random streams.
//!
//! Samplers and Monte Carlo harnesses draw from counter-based ChaCha streams
//! keyed by `(seed, stream id)`, so concurrent work is reproducible
//! regardless of scheduling or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id used by point-process samplers.
pub const STREAM_SAMPLER: u64 = 1;
/// Stream id used for uniform origins in transport trials.
pub const STREAM_ORIGIN: u64 = 2;
/// Stream id used for secondary (inner) integration samples.
pub const STREAM_SECONDARY: u64 = 3;
/// Stream id used by verification harnesses (translations, origins).
pub const STREAM_HARNESS: u64 = 4;

/// A deterministic generator for the given `(seed, stream)` key.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent 64-bit seed for a sub-task (per-trial sampler
/// seeds, per-seed harness runs) via the splitmix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = stream_rng(7, STREAM_SAMPLER);
        let mut r2 = stream_rng(7, STREAM_SAMPLER);
        let mut r3 = stream_rng(7, STREAM_ORIGIN);
        let x1: Vec<u64> = (0..4).map(|_| r1.next_u64()).collect();
        let x2: Vec<u64> = (0..4).map(|_| r2.next_u64()).collect();
        let x3: Vec<u64> = (0..4).map(|_| r3.next_u64()).collect();
        assert_eq!(x1, x2);
        assert_ne!(x1, x3);
    }

    #[test]
    fn derived_seeds_spread() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
    }
}
