use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::laplace::{bradley_terry_prob, select_kernel};
use super::PreferenceDatum;
use crate::error::{Error, Result};
use crate::gp::KernelSpec;
use crate::rng::RoundSeed;
use crate::stats::{roc_auc, MeanStd};
use crate::Scalar;

/// Isotropic RBF hyperparameters searched by Laplace evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityGrid {
    pub lengthscales: Vec<f64>,
    pub signal_variances: Vec<f64>,
}

impl Default for UtilityGrid {
    fn default() -> Self {
        UtilityGrid {
            lengthscales: vec![0.5, 1.0, 2.0, 4.0],
            signal_variances: vec![1.0, 4.0, 16.0],
        }
    }
}

impl UtilityGrid {
    pub fn kernels<T: Scalar>(&self, dim: usize) -> Vec<KernelSpec<T>> {
        let mut out = Vec::new();
        for &l in &self.lengthscales {
            for &s in &self.signal_variances {
                out.push(KernelSpec::rbf(vec![T::lit(l); dim], T::lit(s)));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite());
        if ok(&self.lengthscales) && ok(&self.signal_variances) {
            Ok(())
        } else {
            Err(Error::input("utility grid values must be positive and nonempty"))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferenceEval {
    pub accuracy: MeanStd,
    pub roc_auc: MeanStd,
    pub fold_accuracy: Vec<f64>,
    /// `None` where the test fold held a single class.
    pub fold_auc: Vec<Option<f64>>,
}

/// Per-dimension z-score fitted on `rows`.
fn zscore<T: Scalar>(rows: &[&[T]]) -> (Vec<T>, Vec<T>) {
    let d = rows[0].len();
    let n = T::lit(rows.len() as f64);
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += *v / n;
        }
    }
    let mut sd = vec![T::zero(); d];
    for r in rows {
        for ((s, v), m) in sd.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (*v - *m) * (*v - *m) / n;
        }
    }
    let sd = sd
        .into_iter()
        .map(|v| if v > T::zero() { v.sqrt() } else { T::one() })
        .collect();
    (mean, sd)
}

fn scale<T: Scalar>(x: &[T], mean: &[T], sd: &[T]) -> Vec<T> {
    x.iter().zip(mean).zip(sd).map(|((v, m), s)| (*v - *m) / *s).collect()
}

/// Repeated random train/test splits of the comparisons. Each fold z-scores
/// on its training points, picks the kernel by evidence, and decides test
/// pairs by the plug-in probability at 0.5.
pub fn evaluate_preference_model<T: Scalar>(
    pairs: &[PreferenceDatum<T>],
    grid: &UtilityGrid,
    folds: usize,
    split: f64,
    seed: u64,
) -> Result<PreferenceEval> {
    if pairs.len() < 10 {
        return Err(Error::input("need at least 10 comparisons"));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::input("split must lie strictly between 0 and 1"));
    }
    if folds == 0 {
        return Err(Error::input("need at least one fold"));
    }
    grid.validate()?;
    let n_train = ((pairs.len() as f64) * split).round() as usize;
    let n_train = n_train.clamp(1, pairs.len() - 1);
    let dim = pairs[0].winner_props.len();
    let kernels = grid.kernels::<T>(dim);
    let root = RoundSeed::from_u64(seed);

    let results: Vec<Result<(f64, Option<f64>)>> = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let mut rng = root.stream(fold as u64);
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rng);
            let (train_idx, test_idx) = order.split_at(n_train);
            let rows: Vec<&[T]> = train_idx
                .iter()
                .flat_map(|&i| [&pairs[i].winner_props[..], &pairs[i].loser_props[..]])
                .collect();
            let (mean, sd) = zscore(&rows);
            let norm = |d: &PreferenceDatum<T>| PreferenceDatum {
                winner_props: scale(&d.winner_props, &mean, &sd),
                loser_props: scale(&d.loser_props, &mean, &sd),
                label: d.label,
            };
            let train: Vec<_> = train_idx.iter().map(|&i| norm(&pairs[i])).collect();
            let model = select_kernel(&train, &kernels)?;
            let test: Vec<_> = test_idx.iter().map(|&i| norm(&pairs[i])).collect();
            let queries: Vec<Vec<T>> = test
                .iter()
                .flat_map(|d| [d.winner_props.clone(), d.loser_props.clone()])
                .collect();
            let (mu, _) = model.posterior(&queries)?;
            let mut correct = 0usize;
            let mut scores = Vec::with_capacity(test.len());
            let mut labels = Vec::with_capacity(test.len());
            for (k, d) in test.iter().enumerate() {
                let p = bradley_terry_prob(mu[2 * k], mu[2 * k + 1]).as_f64();
                if (p >= 0.5) == d.label {
                    correct += 1;
                }
                scores.push(p);
                labels.push(d.label);
            }
            Ok((correct as f64 / test.len() as f64, roc_auc(&scores, &labels)))
        })
        .collect();

    let mut fold_accuracy = Vec::with_capacity(folds);
    let mut fold_auc = Vec::with_capacity(folds);
    for r in results {
        let (acc, auc) = r?;
        fold_accuracy.push(acc);
        fold_auc.push(auc);
    }
    let aucs: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    let excluded = folds - aucs.len();
    if excluded > 0 {
        log::warn!("{excluded} fold(s) had a single-class test set; AUC excluded");
    }
    Ok(PreferenceEval {
        accuracy: MeanStd::of(&fold_accuracy),
        roc_auc: MeanStd::of(&aucs),
        fold_accuracy,
        fold_auc,
    })
}
