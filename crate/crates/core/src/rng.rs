//! Fixed splittable counter-based pseudorandom primitives.
//!
//! Everything random in this crate is a pure function of a 64-bit seed and a
//! position (a tree node, a trial index, a draw counter). There is no mutable
//! generator state shared between call sites, so results are identical across
//! platforms, thread schedules and query orders. The mixing function is the
//! SplitMix64 finalizer, which is a fixed part of the on-disk/seed contract
//! and must not change.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the root node for a given seed.
#[inline]
pub fn root_key(seed: u64) -> u64 {
    mix64(seed.wrapping_add(GAMMA))
}

/// Key of the `digit`-th child (0-based) of a node with key `key`.
#[inline]
pub fn child_key(key: u64, digit: u8) -> u64 {
    mix64(key ^ mix64((digit as u64 + 1).wrapping_mul(GAMMA)))
}

/// `index`-th draw of the counter stream attached to `key`.
#[inline]
pub fn stream(key: u64, index: u64) -> u64 {
    mix64(key.wrapping_add((index + 1).wrapping_mul(GAMMA)))
}

/// Seed for the `trial`-th independent Monte Carlo trial under `base_seed`.
#[inline]
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    mix64(base_seed ^ mix64(trial.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Counter-backed uniform draws on `key`'s stream.
pub struct Draws {
    key: u64,
    counter: u64,
}

impl Draws {
    pub fn new(key: u64) -> Self {
        Draws { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = stream(self.key, self.counter);
        self.counter += 1;
        x
    }

    /// Uniform draw in `0..bound`, unbiased via rejection.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Reject draws below the threshold so the accepted range is an exact
        // multiple of `bound`.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Uniform f64 in [0, 1) using the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0f64 / (1u64 << 53) as f64)
    }

    /// Unbiased Fisher-Yates shuffle of `items`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Deterministic pairwise summation with a fixed merge tree.
///
/// Used wherever Monte Carlo results are aggregated, so that totals do not
/// depend on how trials were scheduled across threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
