//! Preferential multi-objective Bayesian optimization for active virtual
//! screening.
//!
//! The crate learns a latent utility over ligand property vectors from
//! pairwise comparisons ([`preference`]), an affinity surrogate over
//! molecular fingerprints ([`gp`]), and drives batched screening campaigns
//! over a candidate library ([`screening`]).
//!
//! The numerical core ([`gp`], [`preference`], [`acquisition::base`],
//! [`oracles::benchmark`]) is generic over a [`Scalar`] type; the campaign
//! machinery runs on `f64` through the aliases below.

pub mod acquisition;
pub mod analysis;
pub mod bench;
pub mod error;
pub mod featurization;
pub mod gp;
pub mod linalg;
pub mod oracles;
pub mod preference;
pub mod rng;
pub mod scalar;
pub mod screening;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Affinity surrogate over fingerprints or real vectors, in double precision.
pub type GpModel = gp::GpRegressionModel<f64>;
/// Kernel hyperparameters in double precision.
pub type Kernel = gp::KernelSpec<f64>;
/// Kernel inputs in double precision.
pub type Features = gp::Features<f64>;
/// Latent utility model in double precision.
pub type UtilityModel = preference::PreferenceGpModel<f64>;
/// Pairwise comparison record in double precision.
pub type Comparison = preference::PreferenceDatum<f64>;
/// Benchmark utility in double precision.
pub type Benchmark = oracles::BenchmarkFunction;
