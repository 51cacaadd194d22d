use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::kernel::{Features, KernelSpec};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, cholesky_with_jitter, solve_lower};
use crate::Scalar;

/// Queries are processed in blocks of this many columns.
pub(crate) const POSTERIOR_CHUNK: usize = 1024;

/// Relative residual a jittered factorization must reach on the unjittered
/// system before it is accepted.
const RESIDUAL_TOL: f64 = 1e-6;

/// Exact GP regression model with zero prior mean.
#[derive(Debug, Clone)]
pub struct GpRegressionModel<T: Scalar> {
    pub kernel: KernelSpec<T>,
    pub noise_variance: T,
    pub train_inputs: Vec<Features<T>>,
    pub train_targets: DVector<T>,
    /// Lower factor of `K + (noise + jitter)·I`.
    pub chol_factor: DMatrix<T>,
    pub alpha: DVector<T>,
    /// Diagonal jitter the factorization needed on top of the noise.
    pub jitter: f64,
}

/// Fits an exact GP. The factorization walks the jitter ladder until the
/// solve reproduces the targets on the unjittered system.
pub fn fit_gp<T: Scalar>(
    inputs: Vec<Features<T>>,
    targets: DVector<T>,
    kernel: KernelSpec<T>,
    noise_variance: T,
) -> Result<GpRegressionModel<T>> {
    if inputs.is_empty() {
        return Err(Error::input("fit_gp needs at least one training point"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::input(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("training targets must be finite"));
    }
    if noise_variance < T::zero() || !noise_variance.is_finite() {
        return Err(Error::input("noise variance must be finite and nonnegative"));
    }
    kernel.validate()?;
    for x in &inputs {
        kernel.check(x)?;
    }
    check_bit_lengths(&inputs)?;

    let mut a = kernel.matrix(&inputs);
    for i in 0..a.nrows() {
        a[(i, i)] += noise_variance;
    }
    let y_norm = targets.norm().as_f64();
    let mut alpha = DVector::zeros(targets.len());
    let factor = cholesky_with_jitter(&a, |l, _| {
        let candidate = cholesky_solve(l, &targets);
        let residual = (&a * &candidate - &targets).norm().as_f64();
        let ok = residual.is_finite() && residual <= RESIDUAL_TOL * y_norm.max(f64::MIN_POSITIVE);
        if ok {
            alpha = candidate;
        }
        ok
    })?;

    Ok(GpRegressionModel {
        kernel,
        noise_variance,
        train_inputs: inputs,
        train_targets: targets,
        chol_factor: factor.l,
        alpha,
        jitter: factor.jitter,
    })
}

fn check_bit_lengths<T: Scalar>(inputs: &[Features<T>]) -> Result<()> {
    let mut len = None;
    for x in inputs {
        if let Features::Bits(b) = x {
            match len {
                None => len = Some(b.len()),
                Some(n) if n != b.len() => {
                    return Err(Error::Representation(format!(
                        "bit vectors of length {} and {}",
                        n,
                        b.len()
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

impl<T: Scalar> GpRegressionModel<T> {
    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    /// Predictive mean and latent variance at each query.
    pub fn posterior(&self, queries: &[Features<T>]) -> Result<(Vec<T>, Vec<T>)> {
        for q in queries {
            self.kernel.check(q)?;
            if let (Features::Bits(a), Some(Features::Bits(b))) = (q, self.train_inputs.first()) {
                if a.len() != b.len() {
                    return Err(Error::Representation(format!(
                        "query has {} bits, model was trained on {}",
                        a.len(),
                        b.len()
                    )));
                }
            }
        }
        let prior = self.kernel.signal_variance();
        let parts: Vec<(Vec<T>, Vec<T>)> = queries
            .par_chunks(POSTERIOR_CHUNK)
            .map(|chunk| {
                let kx = self.kernel.cross(&self.train_inputs, chunk);
                let mean = kx.tr_mul(&self.alpha);
                let v = solve_lower(&self.chol_factor, &kx);
                let var = (0..chunk.len()).map(|j| {
                    let q = v.column(j).norm_squared();
                    let s = prior - q;
                    if s > T::zero() {
                        s
                    } else {
                        T::zero()
                    }
                });
                (mean.iter().copied().collect(), var.collect())
            })
            .collect();
        let mut mean = Vec::with_capacity(queries.len());
        let mut var = Vec::with_capacity(queries.len());
        for (m, v) in parts {
            mean.extend(m);
            var.extend(v);
        }
        Ok((mean, var))
    }

    /// `−½yᵀα − Σ log L_ii − (n/2) log 2π`.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = T::lit(self.n_train() as f64);
        let fit = self.train_targets.dot(&self.alpha);
        let logdet: T = self
            .chol_factor
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, d| acc + d.ln());
        -fit / T::lit(2.0) - logdet - n / T::lit(2.0) * T::two_pi().ln()
    }
}

/// Free-function form of [`GpRegressionModel::posterior`].
pub fn gp_posterior<T: Scalar>(model: &GpRegressionModel<T>, queries: &[Features<T>]) -> Result<(Vec<T>, Vec<T>)> {
    model.posterior(queries)
}

/// Free-function form of [`GpRegressionModel::log_marginal_likelihood`].
pub fn log_marginal_likelihood<T: Scalar>(model: &GpRegressionModel<T>) -> T {
    model.log_marginal_likelihood()
}
