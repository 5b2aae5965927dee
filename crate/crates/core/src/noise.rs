//! Reproducible noise.
//!
//! A [`NoiseStream`] names a ChaCha8 key built from `(seed, stream_id)`.
//! Independent sub-streams (“lanes”) are selected with ChaCha's 64-bit stream
//! parameter, and each lane is consumed sequentially. Particle `i` of a
//! simulation reads lane `i`; at step `m` it draws its `x` then `y` increment,
//! so `(particle, coordinate, step)` always resolves to the same position of
//! the same keystream, independently of thread count or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub type NoiseRng = ChaCha8Rng;

/// Lane reserved for sampling initial conditions.
pub const INITIAL_LANE: u64 = u64::MAX;

const KEY_TAG: [u8; 16] = *b"coulomb-lab/v1\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Generator for one lane, positioned at its first draw.
    pub fn lane(&self, lane: u64) -> NoiseRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..].copy_from_slice(&KEY_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(lane);
        rng
    }

    /// Lane 0.
    pub fn rng(&self) -> NoiseRng {
        self.lane(0)
    }
}

#[inline]
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
