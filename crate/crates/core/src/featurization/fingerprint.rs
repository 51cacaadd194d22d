use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length folded bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    n_bits: usize,
    radius: u32,
    on_count: u32,
}

impl Fingerprint {
    pub fn new(n_bits: usize, radius: u32) -> Result<Self> {
        if n_bits == 0 || !n_bits.is_power_of_two() {
            return Err(Error::input(format!(
                "fingerprint length {n_bits} is not a power of two"
            )));
        }
        Ok(Fingerprint {
            words: vec![0; n_bits.div_ceil(64)],
            n_bits,
            radius,
            on_count: 0,
        })
    }

    pub fn from_bits(n_bits: usize, bits: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut fp = Fingerprint::new(n_bits, 0)?;
        for b in bits {
            if b >= n_bits {
                return Err(Error::input(format!("bit {b} out of range for {n_bits}")));
            }
            fp.set(b);
        }
        Ok(fp)
    }

    pub fn set(&mut self, bit: usize) {
        let (w, m) = (bit / 64, 1u64 << (bit % 64));
        if self.words[w] & m == 0 {
            self.words[w] |= m;
            self.on_count += 1;
        }
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.on_count == 0
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn on_count(&self) -> u32 {
        self.on_count
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&b| self.get(b))
    }

    pub(crate) fn with_radius(mut self, radius: u32) -> Self {
        self.radius = radius;
        self
    }

    pub fn intersection_count(&self, other: &Fingerprint) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// `|a ∧ b| / |a ∨ b|`, with two empty vectors counted as identical.
    /// Lengths must agree.
    pub fn tanimoto(&self, other: &Fingerprint) -> f64 {
        let inter = self.intersection_count(other);
        let union = self.on_count + other.on_count - inter;
        if union == 0 {
            1.0
        } else {
            f64::from(inter) / f64::from(union)
        }
    }
}
