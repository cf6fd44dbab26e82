//! Reproducible per-replica random streams.
//!
//! Each stream is a ChaCha8 generator keyed by a 64-bit seed (mixed with a
//! purpose label) and positioned on its own ChaCha stream by the replica
//! index, so `(seed, label, replica)` reproduces the same sample path and
//! distinct triples never overlap.

use std::convert::Infallible;

use rand::{RngExt, SeedableRng, TryRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Labels separating the random streams used for different purposes within
/// one run.
pub mod label {
    pub const FIELD: u64 = 0x0066_6965_6c64;
    pub const NOISE: u64 = 0x006e_6f69_7365;
    pub const CHAIN: u64 = 0x0063_6861_696e;
    pub const DRIFT: u64 = 0x0064_7269_6674;
    pub const VELOCITY: u64 = 0x0076_656c_6f63;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    replica: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        Self { seed, replica, rng }
    }

    /// Stream for a given purpose label; different labels give unrelated keys.
    pub fn derive(seed: u64, label: u64, replica: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(label)), replica)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// Position in the underlying ChaCha stream, in 32-bit words.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// ±1 with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

impl TryRng for RngStream {
    type Error = Infallible;

    fn try_next_u32(&mut self) -> Result<u32, Infallible> {
        self.rng.try_next_u32()
    }

    fn try_next_u64(&mut self) -> Result<u64, Infallible> {
        self.rng.try_next_u64()
    }

    fn try_fill_bytes(&mut self, dst: &mut [u8]) -> Result<(), Infallible> {
        self.rng.try_fill_bytes(dst)
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
