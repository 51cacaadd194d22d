//! Property-vector assembly and normalization.

use serde::{Deserialize, Serialize};

use super::library::Ligand;
use crate::error::{Error, Result};

/// Per-dimension affine map applied to property vectors before they reach
/// the utility kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Normalizer {
    Identity,
    ZScore { mean: Vec<f64>, std: Vec<f64> },
}

impl Normalizer {
    /// Z-score statistics over `rows`; a constant column keeps unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Normalizer::Identity;
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in &rows {
            for j in 0..d {
                std[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        for s in std.iter_mut() {
            *s = s.sqrt();
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Normalizer::ZScore { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        if let Normalizer::ZScore { mean, std } = self {
            for ((v, m), s) in x.iter_mut().zip(mean).zip(std) {
                *v = (*v - m) / s;
            }
        }
    }

    /// Normalized value of a single coordinate.
    pub fn apply_one(&self, dim: usize, v: f64) -> f64 {
        match self {
            Normalizer::Identity => v,
            Normalizer::ZScore { mean, std } => (v - mean[dim]) / std[dim],
        }
    }
}

/// Extracts `objectives` from the ligand in order and normalizes them.
pub fn assemble_property_vector(ligand: &Ligand, objectives: &[String], normalizer: &Normalizer) -> Result<Vec<f64>> {
    let raw = objectives
        .iter()
        .map(|name| {
            ligand
                .properties
                .get(name)
                .copied()
                .ok_or_else(|| Error::input(format!("ligand `{}` lacks objective `{name}`", ligand.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(normalizer.apply(&raw))
}
