//! Counter-based splittable random streams.
//!
//! Every stream is identified by `(master_seed, stream_id)` and produces its
//! output by encrypting a 128-bit counter block with Philox 2x64-10 rounds.
//! The draw at a given `(master_seed, stream_id, counter)` is a pure function
//! of those three words, so trajectories replay bit-for-bit no matter how
//! walkers are scheduled across threads, and distinct `stream_id`s give
//! statistically independent sequences without coordination.

use serde::{Deserialize, Serialize};

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;
const ROUNDS: u32 = 10;

/// One independently addressable random stream.
///
/// Streams are cheap values: cloning one duplicates its position. Use a fresh
/// `stream_id` (not a clone) whenever independent randomness is needed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    counter: u64,
    cached: Option<u64>,
}

#[inline(always)]
fn philox2x64(mut ctr: [u64; 2], mut key: u64) -> [u64; 2] {
    for _ in 0..ROUNDS {
        let prod = (ctr[0] as u128).wrapping_mul(PHILOX_M as u128);
        let hi = (prod >> 64) as u64;
        let lo = prod as u64;
        ctr = [hi ^ key ^ ctr[1], lo];
        key = key.wrapping_add(PHILOX_W);
    }
    ctr
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            counter: 0,
            cached: None,
        }
    }

    /// Stream with the same master seed and a different stream id. The two
    /// sequences are independent.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.master_seed, stream_id)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Block counter (one block yields two 64-bit draws).
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        if let Some(word) = self.cached.take() {
            return word;
        }
        let block = philox2x64([self.counter, self.stream_id], self.master_seed);
        self.counter = self.counter.wrapping_add(1);
        self.cached = Some(block[1]);
        block[0]
    }

    /// Uniform f64 in `[0, 1)` from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in `(0, 1]`; safe to pass to `ln`.
    #[inline]
    pub fn next_f64_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, bound)` (Lemire widening multiply
    /// with rejection; the rejection branch is vanishingly rare).
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        loop {
            let x = self.next_u64();
            let m = (x as u128).wrapping_mul(bound as u128);
            let lo = m as u64;
            if lo >= bound {
                return (m >> 64) as u64;
            }
            // Low word small: check against the exact rejection threshold.
            let threshold = bound.wrapping_neg() % bound;
            if lo >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard normal via the Box-Muller transform (pairs are drawn lazily).
    #[inline]
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open_zero();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}
