//! Marginal-likelihood hyperparameter search.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{Features, KernelKind, KernelSpec};
use super::regression::fit_gp;
use crate::error::{Error, Result};
use crate::Scalar;

const LOG_MIN: f64 = -13.815510557964274; // ln 1e-6
const LOG_MAX: f64 = 9.210340371976184; // ln 1e4
const START_LO: f64 = -4.605170185988091; // ln 1e-2
const START_HI: f64 = 4.605170185988091; // ln 1e2
const GRAD_TOL: f64 = 1e-5;
const MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperOptions {
    /// Random starts in addition to the default start.
    pub restarts: usize,
    /// Fit hyperparameters on a random subset of at most this many points.
    pub max_hyperopt_points: usize,
}

impl Default for HyperOptions {
    fn default() -> Self {
        HyperOptions {
            restarts: 3,
            max_hyperopt_points: 512,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperFit<T: Scalar> {
    pub kernel: KernelSpec<T>,
    pub noise_variance: T,
    pub log_marginal_likelihood: f64,
    /// Set when no start produced a usable fit and defaults were returned.
    pub warning: Option<String>,
}

pub(crate) fn default_params(kind: KernelKind, dim: usize) -> Vec<f64> {
    // Unit scales, noise 0.1.
    let mut p = match kind {
        KernelKind::Tanimoto => vec![0.0],
        KernelKind::Rbf => vec![0.0; dim + 1],
    };
    p.push(0.1f64.ln());
    p
}

pub(crate) fn unpack<T: Scalar>(kind: KernelKind, p: &[f64]) -> (KernelSpec<T>, T) {
    let n = p.len();
    let noise = T::lit(p[n - 1].exp());
    let signal = T::lit(p[n - 2].exp());
    let spec = match kind {
        KernelKind::Tanimoto => KernelSpec::tanimoto(signal),
        KernelKind::Rbf => KernelSpec::rbf(p[..n - 2].iter().map(|l| T::lit(l.exp())).collect(), signal),
    };
    (spec, noise)
}

/// Negative log marginal likelihood and its gradient with respect to the
/// log-parameters, laid out as `[log ℓ_1.., log s, log σ²]`.
pub(crate) fn neg_lml_and_grad<T: Scalar>(
    kind: KernelKind,
    inputs: &[Features<T>],
    targets: &DVector<T>,
    p: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let (spec, noise) = unpack::<T>(kind, p);
    let model = fit_gp(inputs.to_vec(), targets.clone(), spec.clone(), noise).ok()?;
    let value = -model.log_marginal_likelihood().as_f64();
    if !value.is_finite() {
        return None;
    }
    let n = inputs.len();
    let l = &model.chol_factor;
    let linv = crate::linalg::solve_lower(l, &DMatrix::identity(n, n));
    let kinv = linv.tr_mul(&linv);
    let alpha = &model.alpha;
    // Q = ααᵀ − K⁻¹; dL/dθ = ½ tr(Q ∂K).
    let q = DMatrix::from_fn(n, n, |i, j| (alpha[i] * alpha[j] - kinv[(i, j)]).as_f64());
    let kf = spec.matrix(inputs);
    let mut grad = Vec::with_capacity(p.len());
    if let KernelSpec::Rbf { lengthscales, .. } = &spec {
        for (d, ld) in lengthscales.iter().enumerate() {
            let ld = ld.as_f64();
            let mut g = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let (Features::Real(a), Features::Real(b)) = (&inputs[i], &inputs[j]) else {
                        unreachable!()
                    };
                    let t = (a[d] - b[d]).as_f64() / ld;
                    g += q[(i, j)] * kf[(i, j)].as_f64() * t * t;
                }
            }
            grad.push(-0.5 * g);
        }
    }
    let mut gs = 0.0;
    for j in 0..n {
        for i in 0..n {
            gs += q[(i, j)] * kf[(i, j)].as_f64();
        }
    }
    grad.push(-0.5 * gs);
    let trq: f64 = (0..n).map(|i| q[(i, i)]).sum();
    grad.push(-0.5 * trq * noise.as_f64());
    Some((value, grad))
}

fn project(p: &mut [f64]) {
    for v in p.iter_mut() {
        *v = v.clamp(LOG_MIN, LOG_MAX);
    }
}

/// Gradient with components that push out of the box zeroed.
fn projected_grad(p: &[f64], g: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(g)
        .map(|(&x, &gi)| {
            if (x <= LOG_MIN && gi > 0.0) || (x >= LOG_MAX && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Projected BFGS with Armijo backtracking. Returns the best point found.
fn minimize<F>(mut f: F, start: Vec<f64>) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = start.len();
    let mut x = start;
    project(&mut x);
    let (mut fx, mut gx) = f(&x)?;
    let mut h = DMatrix::<f64>::identity(d, d);
    for _ in 0..MAX_ITERS {
        let pg = projected_grad(&x, &gx);
        if inf_norm(&pg) <= GRAD_TOL {
            break;
        }
        let gvec = DVector::from_vec(pg.clone());
        let mut dir = -(&h * &gvec);
        if dir.dot(&gvec) >= 0.0 {
            h = DMatrix::identity(d, d);
            dir = -gvec.clone();
        }
        // Cap the step at a factor of e^3 per parameter.
        let big = inf_norm(dir.as_slice());
        if big > 3.0 {
            dir *= 3.0 / big;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
            project(&mut cand);
            let moved: f64 = cand.iter().zip(&x).zip(&pg).map(|((c, a), g)| (c - a) * g).sum();
            if let Some((fc, gc)) = f(&cand) {
                if fc <= fx + 1e-4 * moved {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else { break };
        let s = DVector::from_iterator(d, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(d, gn.iter().zip(&gx).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        let improvement = fx - fxn;
        x = xn;
        fx = fxn;
        gx = gn;
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(d, d);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h = left * &h * right + rho * &s * s.transpose();
        }
        if improvement.abs() <= 1e-12 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((x, fx))
}

/// Maximizes the log marginal likelihood over log-hyperparameters.
///
/// The first start is the unit default; `restarts` further starts are drawn
/// log-uniformly from [1e-2, 1e2]. Parameters are kept in [1e-6, 1e4].
pub fn optimize_hyperparameters<T: Scalar, R: Rng + ?Sized>(
    inputs: &[Features<T>],
    targets: &DVector<T>,
    kind: KernelKind,
    options: &HyperOptions,
    rng: &mut R,
) -> Result<HyperFit<T>> {
    if inputs.len() < 2 {
        return Err(Error::input("hyperparameter search needs at least two points"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::input("inputs and targets differ in length"));
    }
    let dim = match (&inputs[0], kind) {
        (Features::Real(v), KernelKind::Rbf) => v.len(),
        (Features::Bits(_), KernelKind::Tanimoto) => 0,
        _ => return Err(Error::Representation("inputs do not match the kernel kind".into())),
    };

    let (xs, ys): (Vec<Features<T>>, DVector<T>) = if inputs.len() > options.max_hyperopt_points.max(2) {
        let mut idx = sample(rng, inputs.len(), options.max_hyperopt_points.max(2)).into_vec();
        idx.sort_unstable();
        (
            idx.iter().map(|&i| inputs[i].clone()).collect(),
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| targets[i])),
        )
    } else {
        (inputs.to_vec(), targets.clone())
    };

    let defaults = default_params(kind, dim);
    let mut starts = vec![defaults.clone()];
    for _ in 0..options.restarts {
        starts.push(
            (0..defaults.len())
                .map(|_| rng.random_range(START_LO..START_HI))
                .collect(),
        );
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let found = minimize(|p| neg_lml_and_grad(kind, &xs, &ys, p), start);
        if let Some((p, v)) = found {
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((p, v));
            }
        }
    }
    match best {
        Some((p, v)) => {
            let (kernel, noise_variance) = unpack(kind, &p);
            Ok(HyperFit {
                kernel,
                noise_variance,
                log_marginal_likelihood: -v,
                warning: None,
            })
        }
        None => {
            let (kernel, noise_variance) = unpack(kind, &defaults);
            log::warn!("hyperparameter search failed from every start; using defaults");
            Ok(HyperFit {
                kernel,
                noise_variance,
                log_marginal_likelihood: f64::NAN,
                warning: Some("all restarts failed, defaults returned".into()),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> (Vec<Features<f64>>, DVector<f64>) {
        let xs: Vec<_> = (0..n)
            .map(|i| Features::Real(vec![i as f64 / n as f64 * 4.0]))
            .collect();
        let ys = DVector::from_iterator(n, (0..n).map(|i| 0.5 * i as f64 / n as f64 * 4.0 - 1.0));
        (xs, ys)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (xs, ys) = line(7);
        for kind in [KernelKind::Rbf] {
            let p = vec![0.3, -0.2, -1.5];
            let (_, g) = neg_lml_and_grad(kind, &xs, &ys, &p).unwrap();
            for k in 0..p.len() {
                let h = 1e-6;
                let mut a = p.clone();
                a[k] += h;
                let mut b = p.clone();
                b[k] -= h;
                let fa = neg_lml_and_grad(kind, &xs, &ys, &a).unwrap().0;
                let fb = neg_lml_and_grad(kind, &xs, &ys, &b).unwrap().0;
                let fd = (fa - fb) / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "param {k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let (xs, ys) = line(12);
        let opts = HyperOptions {
            restarts: 1,
            ..Default::default()
        };
        let a = optimize_hyperparameters(&xs, &ys, KernelKind::Rbf, &opts, &mut crate::rng::seeded(3)).unwrap();
        let b = optimize_hyperparameters(&xs, &ys, KernelKind::Rbf, &opts, &mut crate::rng::seeded(3)).unwrap();
        assert_eq!(a.kernel, b.kernel);
        assert_eq!(a.noise_variance, b.noise_variance);
    }

    #[test]
    fn too_few_points() {
        let (xs, ys) = line(1);
        let r = optimize_hyperparameters(
            &xs,
            &ys,
            KernelKind::Rbf,
            &HyperOptions::default(),
            &mut crate::rng::seeded(0),
        );
        assert!(r.is_err());
    }
}
