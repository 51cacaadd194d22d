use super::{AcquisitionKind, AcquisitionSpec};
use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_pdf};
use crate::Scalar;

/// Closed-form single-point acquisition from a Gaussian predictive.
/// Greedy and ε-greedy score by the mean. Sampling-based kinds have no
/// closed form here and are rejected.
pub fn base_acquisition<T: Scalar>(mean: T, std: T, spec: &AcquisitionSpec) -> Result<T> {
    if !(std >= T::zero()) {
        return Err(Error::input("standard deviation must be nonnegative"));
    }
    let incumbent = || {
        spec.incumbent
            .map(T::lit)
            .ok_or_else(|| Error::input("qEI/qPI need an incumbent"))
    };
    match spec.kind {
        AcquisitionKind::QEi => {
            let gap = mean - incumbent()?;
            if std == T::zero() {
                return Ok(gap.max(T::zero()));
            }
            let z = (gap / std).as_f64();
            Ok(gap * T::lit(normal_cdf(z)) + std * T::lit(normal_pdf(z)))
        }
        AcquisitionKind::QPi => {
            let gap = mean - incumbent()?;
            if std == T::zero() {
                return Ok(if gap > T::zero() { T::one() } else { T::zero() });
            }
            Ok(T::lit(normal_cdf((gap / std).as_f64())))
        }
        AcquisitionKind::QUcb => Ok(mean + T::lit(spec.beta) * std),
        AcquisitionKind::Greedy | AcquisitionKind::EpsilonGreedy => Ok(mean),
        k => Err(Error::input(format!(
            "{} has no closed-form base acquisition",
            k.name()
        ))),
    }
}

/// `E[max(X, Y)]` for a bivariate normal with the given moments.
pub fn expected_max(mu_x: f64, var_x: f64, mu_y: f64, var_y: f64, cov: f64) -> f64 {
    let theta2 = var_x + var_y - 2.0 * cov;
    if !(theta2 > 1e-300) {
        return mu_x.max(mu_y);
    }
    let theta = theta2.sqrt();
    let a = (mu_x - mu_y) / theta;
    mu_x * normal_cdf(a) + mu_y * normal_cdf(-a) + theta * normal_pdf(a)
}
