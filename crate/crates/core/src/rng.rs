//! Seeded random streams.
//!
//! Every campaign owns one [`ChaCha8Rng`]; work that may run in parallel
//! draws a round seed from it and derives one independent stream per item,
//! so serial and parallel evaluation consume identical randomness.

use rand::{RngCore, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for a family of per-item streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RoundSeed([u8; 32]);

impl RoundSeed {
    pub fn draw<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        RoundSeed(bytes)
    }

    pub fn from_u64(seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self::draw(&mut rng)
    }

    /// Independent stream for item `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}
