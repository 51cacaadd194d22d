use nalgebra::DVector;
use rand::Rng;

use super::hyper::{optimize_hyperparameters, HyperOptions};
use super::kernel::{Features, KernelKind};
use super::regression::{fit_gp, GpRegressionModel};
use crate::error::Result;
use crate::Scalar;

pub type SurrogateOptions = HyperOptions;

/// GP on standardized targets. Predictions come back in the original units.
#[derive(Debug, Clone)]
pub struct AffinitySurrogate<T: Scalar> {
    pub model: GpRegressionModel<T>,
    pub target_mean: T,
    pub target_scale: T,
    pub warning: Option<String>,
}

impl<T: Scalar> AffinitySurrogate<T> {
    /// Standardizes the targets, searches hyperparameters, then fits on all
    /// points. A single point gets the default hyperparameters.
    pub fn fit<R: Rng + ?Sized>(
        inputs: Vec<Features<T>>,
        targets: &[T],
        kind: KernelKind,
        options: &HyperOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let n = targets.len();
        let nt = T::lit(n as f64);
        let mean = targets.iter().fold(T::zero(), |a, &b| a + b) / nt;
        let var = if n > 1 {
            targets.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / T::lit((n - 1) as f64)
        } else {
            T::zero()
        };
        let scale = if var > T::zero() { var.sqrt() } else { T::one() };
        let ys = DVector::from_iterator(n, targets.iter().map(|&t| (t - mean) / scale));

        let (kernel, noise, warning) = if n >= 2 {
            let h = optimize_hyperparameters(&inputs, &ys, kind, options, rng)?;
            (h.kernel, h.noise_variance, h.warning)
        } else {
            let dim = match inputs.first() {
                Some(Features::Real(v)) => v.len(),
                _ => 0,
            };
            let (k, s) = super::hyper::unpack(kind, &super::hyper::default_params(kind, dim));
            (k, s, None)
        };
        let model = fit_gp(inputs, ys, kernel, noise)?;
        Ok(AffinitySurrogate {
            model,
            target_mean: mean,
            target_scale: scale,
            warning,
        })
    }

    /// Mean and latent variance in target units.
    pub fn posterior(&self, queries: &[Features<T>]) -> Result<(Vec<T>, Vec<T>)> {
        let (m, v) = self.model.posterior(queries)?;
        let s = self.target_scale;
        Ok((
            m.into_iter().map(|x| x * s + self.target_mean).collect(),
            v.into_iter().map(|x| x * s * s).collect(),
        ))
    }
}
