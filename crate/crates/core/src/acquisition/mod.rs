//! Candidate scoring and batch selection.

pub mod base;
pub mod score;
pub mod select;

pub use base::{base_acquisition, expected_max};
pub use score::{
    mc_expected_acquisition, score_candidates, thompson_scores, Candidate, ScoringContext, AFFINITY_STREAM_BASE,
};
pub use select::{sample_preference_queries, select_batch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcquisitionKind {
    #[serde(rename = "qei", alias = "qEI")]
    QEi,
    #[serde(rename = "qpi", alias = "qPI")]
    QPi,
    #[serde(rename = "qucb", alias = "qUCB")]
    QUcb,
    #[serde(rename = "qts", alias = "qTS")]
    QTs,
    #[serde(rename = "qeubo", alias = "qEUBO")]
    QEubo,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "epsilon_greedy")]
    EpsilonGreedy,
    #[serde(rename = "random")]
    Random,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 8] = [
        AcquisitionKind::QEi,
        AcquisitionKind::QPi,
        AcquisitionKind::QUcb,
        AcquisitionKind::QTs,
        AcquisitionKind::QEubo,
        AcquisitionKind::Greedy,
        AcquisitionKind::EpsilonGreedy,
        AcquisitionKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::QEi => "qei",
            AcquisitionKind::QPi => "qpi",
            AcquisitionKind::QUcb => "qucb",
            AcquisitionKind::QTs => "qts",
            AcquisitionKind::QEubo => "qeubo",
            AcquisitionKind::Greedy => "greedy",
            AcquisitionKind::EpsilonGreedy => "epsilon_greedy",
            AcquisitionKind::Random => "random",
        }
    }

    /// Whether scoring needs posterior variances.
    pub fn needs_variance(self) -> bool {
        matches!(
            self,
            AcquisitionKind::QEi | AcquisitionKind::QPi | AcquisitionKind::QUcb | AcquisitionKind::QEubo
        )
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AcquisitionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown acquisition `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    /// Exploration weight for qUCB.
    pub beta: f64,
    pub epsilon: f64,
    /// Draws from the affinity posterior per candidate.
    pub mc_affinity_samples: usize,
    /// Posterior draws used by the sampling-based strategies.
    pub utility_samples: usize,
    /// Candidates per joint Thompson draw.
    pub thompson_chunk: usize,
    /// Best utility so far for qEI/qPI; filled in each round when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incumbent: Option<f64>,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        AcquisitionSpec {
            kind: AcquisitionKind::EpsilonGreedy,
            beta: 2.0,
            epsilon: 0.05,
            mc_affinity_samples: 32,
            utility_samples: 16,
            thompson_chunk: 512,
            incumbent: None,
        }
    }
}

impl AcquisitionSpec {
    pub fn of(kind: AcquisitionKind) -> Self {
        AcquisitionSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::input("epsilon must lie in [0, 1]"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::input("beta must be finite and nonnegative"));
        }
        if self.mc_affinity_samples == 0 || self.utility_samples == 0 {
            return Err(Error::input("sample counts must be at least 1"));
        }
        if self.thompson_chunk == 0 || self.thompson_chunk > 2048 {
            return Err(Error::input("thompson_chunk must lie in 1..=2048"));
        }
        Ok(())
    }
}

/// Score of one unscreened ligand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub ligand_id: String,
    pub acquisition_value: f64,
    pub predicted_utility_mean: f64,
    pub predicted_utility_var: f64,
}
