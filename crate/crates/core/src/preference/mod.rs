//! Latent utility learned from pairwise comparisons.

pub mod evaluate;
pub mod laplace;
pub mod log;

pub use evaluate::{evaluate_preference_model, PreferenceEval, UtilityGrid};
pub use laplace::{
    bradley_terry_prob, laplace_fit, laplace_fit_indexed, predict_preference, select_kernel, utility_posterior,
    PreferenceGpModel, DEFAULT_MC_SAMPLES,
};
pub use log::{read_preference_log, PreferenceLogWriter, PreferenceRecord};

use serde::{Deserialize, Serialize};

/// One comparison. `label` is true when `winner_props` was preferred, so a
/// datum with `label = false` says the opposite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDatum<T> {
    pub winner_props: Vec<T>,
    pub loser_props: Vec<T>,
    pub label: bool,
}

impl<T: Clone> PreferenceDatum<T> {
    pub fn new(winner_props: Vec<T>, loser_props: Vec<T>) -> Self {
        PreferenceDatum {
            winner_props,
            loser_props,
            label: true,
        }
    }

    /// `(preferred, other)` after applying the label.
    pub fn oriented(&self) -> (&[T], &[T]) {
        if self.label {
            (&self.winner_props, &self.loser_props)
        } else {
            (&self.loser_props, &self.winner_props)
        }
    }
}
