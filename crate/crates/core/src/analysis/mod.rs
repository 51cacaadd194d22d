//! Linear preference models over interaction expansions of the objectives.

pub mod interactions;
pub mod logistic;

pub use interactions::{feature_count, interaction_expand, InteractionDesign};
pub use logistic::{fit_linear_preference, interaction_pairs, LinearPreferenceOptions, LAMBDA_GRID};
