//! Exact Gaussian-process regression.

pub mod hyper;
pub mod kernel;
pub mod regression;
pub mod surrogate;

pub use hyper::{optimize_hyperparameters, HyperFit, HyperOptions};
pub use kernel::{kernel_eval, Features, KernelKind, KernelSpec};
pub use regression::{fit_gp, GpRegressionModel};
pub use regression::{gp_posterior, log_marginal_likelihood};
pub use surrogate::{AffinitySurrogate, SurrogateOptions};
