use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurization::Fingerprint;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Tanimoto,
    Rbf,
}

/// Covariance function and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec<T> {
    /// `s · |a ∧ b| / |a ∨ b|` over bit vectors.
    Tanimoto { signal_variance: T },
    /// Squared exponential with one lengthscale per input dimension.
    Rbf { lengthscales: Vec<T>, signal_variance: T },
}

/// Kernel input: a folded fingerprint or a real vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Features<T> {
    Bits(Fingerprint),
    Real(Vec<T>),
}

impl<T: Scalar> KernelSpec<T> {
    pub fn tanimoto(signal_variance: T) -> Self {
        KernelSpec::Tanimoto { signal_variance }
    }

    pub fn rbf(lengthscales: Vec<T>, signal_variance: T) -> Self {
        KernelSpec::Rbf {
            lengthscales,
            signal_variance,
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Tanimoto { .. } => KernelKind::Tanimoto,
            KernelSpec::Rbf { .. } => KernelKind::Rbf,
        }
    }

    pub fn signal_variance(&self) -> T {
        match self {
            KernelSpec::Tanimoto { signal_variance } | KernelSpec::Rbf { signal_variance, .. } => *signal_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        match self {
            KernelSpec::Tanimoto { signal_variance } if ok(*signal_variance) => Ok(()),
            KernelSpec::Rbf {
                lengthscales,
                signal_variance,
            } if ok(*signal_variance) && !lengthscales.is_empty() && lengthscales.iter().all(|&l| ok(l)) => Ok(()),
            _ => Err(Error::input(
                "kernel hyperparameters must be finite and strictly positive",
            )),
        }
    }

    /// Checks that `x` is the representation this kernel expects.
    pub fn check(&self, x: &Features<T>) -> Result<()> {
        match (self, x) {
            (KernelSpec::Tanimoto { .. }, Features::Bits(_)) => Ok(()),
            (KernelSpec::Rbf { lengthscales, .. }, Features::Real(v)) if v.len() == lengthscales.len() => Ok(()),
            (KernelSpec::Rbf { lengthscales, .. }, Features::Real(v)) => Err(Error::Representation(format!(
                "expected {} dimensions, got {}",
                lengthscales.len(),
                v.len()
            ))),
            (KernelSpec::Tanimoto { .. }, Features::Real(_)) => {
                Err(Error::Representation("tanimoto kernel needs bit vectors".into()))
            }
            (KernelSpec::Rbf { .. }, Features::Bits(_)) => {
                Err(Error::Representation("rbf kernel needs real vectors".into()))
            }
        }
    }

    pub(crate) fn eval_unchecked(&self, a: &Features<T>, b: &Features<T>) -> T {
        match (self, a, b) {
            (KernelSpec::Tanimoto { signal_variance }, Features::Bits(x), Features::Bits(y)) => {
                *signal_variance * T::lit(x.tanimoto(y))
            }
            (
                KernelSpec::Rbf {
                    lengthscales,
                    signal_variance,
                },
                Features::Real(x),
                Features::Real(y),
            ) => {
                let mut d2 = T::zero();
                for ((xi, yi), l) in x.iter().zip(y).zip(lengthscales) {
                    let t = (*xi - *yi) / *l;
                    d2 += t * t;
                }
                *signal_variance * (-d2 / T::lit(2.0)).exp()
            }
            _ => unreachable!("representation checked by caller"),
        }
    }

    /// Prior covariance `K(xs, xs)`.
    pub fn matrix(&self, xs: &[Features<T>]) -> DMatrix<T> {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Cross covariance with training points down the rows, queries across
    /// the columns.
    pub fn cross(&self, train: &[Features<T>], queries: &[Features<T>]) -> DMatrix<T> {
        DMatrix::from_fn(train.len(), queries.len(), |i, j| {
            self.eval_unchecked(&train[i], &queries[j])
        })
    }
}

/// Evaluates the kernel on one pair of inputs.
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, a: &Features<T>, b: &Features<T>) -> Result<T> {
    spec.check(a)?;
    spec.check(b)?;
    if let (Features::Bits(x), Features::Bits(y)) = (a, b) {
        if x.len() != y.len() {
            return Err(Error::Representation(format!(
                "bit vectors of length {} and {}",
                x.len(),
                y.len()
            )));
        }
    }
    Ok(spec.eval_unchecked(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(b: &[usize]) -> Features<f64> {
        Features::Bits(Fingerprint::from_bits(64, b.iter().copied()).unwrap())
    }

    #[test]
    fn tanimoto_identical_nonzero() {
        let k = KernelSpec::tanimoto(2.5);
        assert_eq!(kernel_eval(&k, &bits(&[3, 9]), &bits(&[3, 9])).unwrap(), 2.5);
    }

    #[test]
    fn tanimoto_half_overlap() {
        // {1,2,3} ∧ {2,3,4} = 2 bits, ∨ = 4 bits.
        let k = KernelSpec::tanimoto(1.0);
        assert_eq!(kernel_eval(&k, &bits(&[1, 2, 3]), &bits(&[2, 3, 4])).unwrap(), 0.5);
    }

    #[test]
    fn tanimoto_empty_vectors_are_identical() {
        let k = KernelSpec::tanimoto(1.0);
        assert_eq!(kernel_eval(&k, &bits(&[]), &bits(&[])).unwrap(), 1.0);
    }

    #[test]
    fn rbf_zero_distance() {
        let k = KernelSpec::rbf(vec![0.3, 7.0], 2.0);
        let x = Features::Real(vec![1.0, -4.0]);
        assert_eq!(kernel_eval(&k, &x, &x).unwrap(), 2.0);
    }

    #[test]
    fn rbf_known_value() {
        let k = KernelSpec::rbf(vec![2.0], 1.0);
        let v = kernel_eval(&k, &Features::Real(vec![0.0]), &Features::Real(vec![2.0])).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mismatches_are_errors() {
        let t = KernelSpec::<f64>::tanimoto(1.0);
        assert!(matches!(
            kernel_eval(&t, &Features::Real(vec![1.0]), &bits(&[1])),
            Err(Error::Representation(_))
        ));
        let r = KernelSpec::rbf(vec![1.0, 1.0], 1.0);
        assert!(kernel_eval(&r, &Features::Real(vec![1.0]), &Features::Real(vec![1.0, 2.0])).is_err());
        let short = Features::Bits(Fingerprint::from_bits(128, [1]).unwrap());
        assert!(kernel_eval(&t, &bits(&[1]), &short).is_err());
    }

    #[test]
    fn validate_rejects_nonpositive() {
        assert!(KernelSpec::<f64>::tanimoto(0.0).validate().is_err());
        assert!(KernelSpec::rbf(vec![1.0, -1.0], 1.0).validate().is_err());
        assert!(KernelSpec::rbf(vec![1.0], 1.0).validate().is_ok());
    }
}
