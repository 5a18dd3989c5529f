//! Deterministic pseudo-random number generation.
//!
//! The generator is xoshiro256** (Blackman & Vigna) with its 256-bit state
//! expanded from a 64-bit seed by SplitMix64. Both algorithms are implemented
//! here with wrapping integer arithmetic only, so a given seed produces the
//! same stream on every platform and toolchain.
//!
//! Derived helpers:
//! - `next_f64` takes the top 53 bits of `next_u64` and scales by 2^-53, giving
//!   a value in `[0, 1)`.
//! - `below(n)` uses Lemire's multiply-and-reject method, so it is unbiased.
//! - `Rng::derive(seed, path)` folds each index of `path` into the seed through
//!   SplitMix64 finalisation; equal `(seed, path)` always yields the same child.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    mix64(*state)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xoshiro256** generator seeded through SplitMix64.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        // SplitMix64 outputs are a bijection of distinct counters, so all four
        // words cannot be zero at once.
        Self { seed, s }
    }

    /// Child generator for a hierarchical index path, e.g. `(algorithm, seed)`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut acc = mix64(seed ^ 0x6a09_e667_f3bc_c908);
        for &index in path {
            acc = mix64(acc.wrapping_add(GOLDEN_GAMMA).wrapping_add(mix64(index)));
        }
        Self::new(acc)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    ///
    /// # Panics
    ///
    /// Panics if `n` is zero.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) has no valid output");
        let n = n as u64;
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as usize
    }
}
