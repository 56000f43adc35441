//! Deterministic seed derivation.
//!
//! Every piece of randomness in this crate is keyed by `(seed, index)` pairs
//! through the SplitMix64 stream defined here, so that ensembles, signals and
//! whole Monte Carlo sweeps are reproducible bit for bit regardless of
//! evaluation order or thread count. The mixing function is part of the
//! external interface: two builds that agree on `mix_seed` produce identical
//! masks from identical seeds.

/// Golden-ratio increment of the SplitMix64 sequence.
pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output (finalization) function. Bijective on `u64`.
#[inline]
pub fn splitmix_finalize(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the sub-seed for item `index` under `master_seed`.
///
/// This is the `(index + 1)`-th output of the SplitMix64 stream seeded with
/// `master_seed`: `finalize(master_seed + (index + 1) * GAMMA)`.
#[inline]
pub fn mix_seed(master_seed: u64, index: u64) -> u64 {
    splitmix_finalize(master_seed.wrapping_add(SPLITMIX_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// A SplitMix64 word stream. `next_u64` yields `finalize(seed + k * GAMMA)`
/// for k = 1, 2, ...
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(SPLITMIX_GAMMA);
        splitmix_finalize(self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_matches_mix_seed() {
        let mut stream = SplitMix64::new(42);
        for index in 0..16 {
            assert_eq!(stream.next_u64(), mix_seed(42, index));
        }
    }

    #[test]
    fn finalize_reference_values() {
        // First three outputs of the SplitMix64 generator seeded with 0,
        // cross-checked against the reference implementation by Vigna.
        let mut stream = SplitMix64::new(0);
        assert_eq!(stream.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(stream.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(stream.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn distinct_indices_give_distinct_seeds() {
        let seeds: Vec<u64> = (0..1000).map(|i| mix_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
    }
}
