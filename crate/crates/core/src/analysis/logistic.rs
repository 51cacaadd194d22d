use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interactions::InteractionDesign;
use crate::error::{Error, Result};
use crate::preference::{PreferenceDatum, PreferenceEval};
use crate::rng::RoundSeed;
use crate::stats::{logistic, roc_auc, MeanStd};

/// L2 strengths tried on the inner validation split.
pub const LAMBDA_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];
const INNER_SPLIT: f64 = 0.75;
const NEWTON_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearPreferenceOptions {
    pub order: usize,
    pub folds: usize,
    pub split: f64,
    pub seed: u64,
    pub include_squares: bool,
}

impl Default for LinearPreferenceOptions {
    fn default() -> Self {
        LinearPreferenceOptions {
            order: 1,
            folds: 20,
            split: 0.8,
            seed: 0,
            include_squares: false,
        }
    }
}

/// L2-penalized logistic regression without intercept, by Newton's method
/// on `mean log(1 + exp(−y wᵀx)) + λ/2 ‖w‖²` with `y = ±1`.
fn fit_logistic(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> DVector<f64> {
    let (n, p) = x.shape();
    let mut w = DVector::zeros(p);
    for _ in 0..NEWTON_ITERS {
        let margin = x * &w;
        let mut g = &w * lambda;
        let mut h = DMatrix::identity(p, p) * lambda;
        let mut weights = DVector::zeros(n);
        let mut resid = DVector::zeros(n);
        for i in 0..n {
            let s = logistic(-y[i] * margin[i]);
            resid[i] = -y[i] * s / n as f64;
            weights[i] = s * (1.0 - s) / n as f64;
        }
        g += x.tr_mul(&resid);
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * weights[i]);
        h += x.tr_mul(&xw);
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else {
            break;
        };
        w -= &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    w
}

fn design_rows(
    design: &InteractionDesign,
    pairs: &[&PreferenceDatum<f64>],
    center: &[f64],
    scale: &[f64],
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let z = |x: &[f64]| -> Vec<f64> { x.iter().zip(center).zip(scale).map(|((v, c), s)| (v - c) / s).collect() };
    let mut rows = Vec::with_capacity(pairs.len() * design.len());
    let mut y = Vec::with_capacity(pairs.len());
    for d in pairs {
        let a = design.expand(&z(&d.winner_props))?;
        let b = design.expand(&z(&d.loser_props))?;
        rows.extend(a.iter().zip(&b).map(|(p, q)| p - q));
        y.push(if d.label { 1.0 } else { -1.0 });
    }
    Ok((DMatrix::from_row_slice(pairs.len(), design.len(), &rows), y))
}

/// Divides every column by its root mean square (no centering, so the
/// sign symmetry of differences is kept). Returns the scales.
fn rms_scale(x: &mut DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let r = (x.column(j).norm_squared() / n).sqrt();
            let r = if r > 1e-12 { r } else { 1.0 };
            x.column_mut(j).scale_mut(1.0 / r);
            r
        })
        .collect()
}

fn log_loss(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>) -> f64 {
    let m = x * w;
    y.iter()
        .zip(m.iter())
        .map(|(yi, mi)| {
            let z = yi * mi;
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / y.len() as f64
}

/// Repeated-split evaluation of a logistic model on differences of
/// expanded, z-scored property vectors. λ is picked per fold by validation
/// log-loss on an inner split of the training pairs.
pub fn fit_linear_preference(pairs: &[PreferenceDatum<f64>], opts: &LinearPreferenceOptions) -> Result<PreferenceEval> {
    if pairs.len() < 10 {
        return Err(Error::input("need at least 10 comparisons"));
    }
    if !(opts.split > 0.0 && opts.split < 1.0) || opts.folds == 0 {
        return Err(Error::input("split must lie in (0, 1) and folds must be positive"));
    }
    let dim = pairs[0].winner_props.len();
    let design = InteractionDesign::new(dim, opts.order, opts.include_squares, None)?;
    let n_train = ((pairs.len() as f64 * opts.split).round() as usize).clamp(2, pairs.len() - 1);
    let root = RoundSeed::from_u64(opts.seed);

    let results: Vec<Result<(f64, Option<f64>)>> = (0..opts.folds)
        .into_par_iter()
        .map(|fold| {
            let mut rng = root.stream(fold as u64);
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rng);
            let (tr, te) = order.split_at(n_train);
            let train: Vec<&PreferenceDatum<f64>> = tr.iter().map(|&i| &pairs[i]).collect();
            let test: Vec<&PreferenceDatum<f64>> = te.iter().map(|&i| &pairs[i]).collect();

            let mut center = vec![0.0; dim];
            let mut spread = vec![0.0; dim];
            let m = 2.0 * train.len() as f64;
            for d in &train {
                for x in [&d.winner_props, &d.loser_props] {
                    for j in 0..dim {
                        center[j] += x[j] / m;
                    }
                }
            }
            for d in &train {
                for x in [&d.winner_props, &d.loser_props] {
                    for j in 0..dim {
                        spread[j] += (x[j] - center[j]).powi(2) / m;
                    }
                }
            }
            let scale: Vec<f64> = spread.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();

            let (mut xtr, ytr) = design_rows(&design, &train, &center, &scale)?;
            let col_scale = rms_scale(&mut xtr);
            let n_inner = ((train.len() as f64 * INNER_SPLIT).round() as usize).clamp(1, train.len() - 1);
            let xin = xtr.rows(0, n_inner).clone_owned();
            let xval = xtr.rows(n_inner, train.len() - n_inner).clone_owned();
            let lambda = LAMBDA_GRID
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let la = log_loss(&xval, &ytr[n_inner..], &fit_logistic(&xin, &ytr[..n_inner], a));
                    let lb = log_loss(&xval, &ytr[n_inner..], &fit_logistic(&xin, &ytr[..n_inner], b));
                    la.total_cmp(&lb)
                })
                .expect("nonempty grid");
            let w = fit_logistic(&xtr, &ytr, lambda);

            let (mut xte, yte) = design_rows(&design, &test, &center, &scale)?;
            for (j, s) in col_scale.iter().enumerate() {
                xte.column_mut(j).scale_mut(1.0 / s);
            }
            let scores = &xte * &w;
            let correct = scores
                .iter()
                .zip(&yte)
                .filter(|(s, y)| (**s >= 0.0) == (**y > 0.0))
                .count();
            let labels: Vec<bool> = yte.iter().map(|y| *y > 0.0).collect();
            Ok((correct as f64 / test.len() as f64, roc_auc(scores.as_slice(), &labels)))
        })
        .collect();

    let mut fold_accuracy = Vec::new();
    let mut fold_auc = Vec::new();
    for r in results {
        let (a, u) = r?;
        fold_accuracy.push(a);
        fold_auc.push(u);
    }
    let aucs: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    if aucs.len() < fold_auc.len() {
        log::warn!(
            "{} fold(s) had a single-class test set; AUC excluded",
            fold_auc.len() - aucs.len()
        );
    }
    Ok(PreferenceEval {
        accuracy: MeanStd::of(&fold_accuracy),
        roc_auc: MeanStd::of(&aucs),
        fold_accuracy,
        fold_auc,
    })
}

/// Comparisons over four variables drawn uniformly from [-1, 1], labelled
/// by Bradley–Terry sampling on a utility whose structure is mostly carried
/// by interaction terms: weak main effects, a two-way term, a dominant
/// three-way term and a smaller four-way term.
pub fn interaction_pairs<R: Rng + ?Sized>(n_pairs: usize, rng: &mut R) -> Vec<PreferenceDatum<f64>> {
    let utility = |x: &[f64]| {
        0.6 * x[0] - 0.4 * x[1] + 0.3 * x[2] + 0.8 * x[0] * x[3] - 0.6 * x[1] * x[2] + 3.0 * x[0] * x[1] * x[2]
            - 2.5 * x[1] * x[2] * x[3]
            + 3.0 * x[0] * x[1] * x[2] * x[3]
    };
    let scale = 3.0;
    (0..n_pairs)
        .map(|_| {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = logistic(scale * (utility(&a) - utility(&b)));
            PreferenceDatum {
                winner_props: a,
                loser_props: b,
                label: rng.random_bool(p),
            }
        })
        .collect()
}
