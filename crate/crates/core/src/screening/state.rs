use serde::{Deserialize, Serialize};

use crate::preference::PreferenceRecord;
use crate::rng::{ChaCha8Rng, RoundSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Initializing,
    AwaitingLabels,
    Acquiring,
    Measuring,
    Done,
    /// Reported while a campaign is suspended; never stored as a phase.
    Suspended,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Initializing => "initializing",
            Status::AwaitingLabels => "awaiting_labels",
            Status::Acquiring => "acquiring",
            Status::Measuring => "measuring",
            Status::Done => "done",
            Status::Suspended => "suspended",
        }
    }

    /// Whether `self -> next` is an edge of
    /// initializing -> (awaiting_labels -> acquiring -> measuring)* -> done.
    pub fn allows(self, next: Status) -> bool {
        use Status::*;
        matches!(
            (self, next),
            (Initializing, AwaitingLabels)
                | (Initializing, Done)
                | (AwaitingLabels, Acquiring)
                | (Acquiring, Measuring)
                | (Measuring, AwaitingLabels)
                | (Measuring, Done)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub seq: u64,
    pub iteration: u32,
    pub from: Status,
    pub to: Status,
}

/// One measured (or failed) ligand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedEntry {
    pub id: String,
    /// Library position.
    pub index: usize,
    /// Iteration that selected it; 0 for the initial sample.
    pub iteration: u32,
    /// `None` when the oracle failed.
    pub affinity: Option<f64>,
}

/// A queued comparison; `left_wins` is set once labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub pair_id: String,
    pub left: usize,
    pub right: usize,
    pub left_wins: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: u32,
    pub n_screened: usize,
    pub n_failed: usize,
    /// Missing without ground truth.
    pub regret: Option<f64>,
    /// Aligned with the configured cut-offs.
    pub top_k_accuracy: Vec<Option<f64>>,
    pub best_utility_found: Option<f64>,
}

/// Everything needed to continue a campaign, library excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub library_digest: String,
    pub library_size: usize,
    /// In measurement order.
    pub screened: Vec<ScreenedEntry>,
    pub status: Status,
    pub suspended: bool,
    /// Completed iterations.
    pub iteration: u32,
    pub pairs: Vec<PendingPair>,
    /// Accepted comparisons in acceptance order (the preference dataset).
    pub preference_data: Vec<PreferenceRecord>,
    pub metric_trace: Vec<MetricRecord>,
    pub rng: ChaCha8Rng,
    /// Seed of the iteration in progress.
    pub round: Option<RoundSeed>,
    pub transitions: Vec<Transition>,
}

impl CampaignState {
    /// Membership flags over library positions.
    pub fn screened_flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.library_size];
        for e in &self.screened {
            f[e.index] = true;
        }
        f
    }

    pub fn unscreened(&self) -> Vec<usize> {
        let f = self.screened_flags();
        (0..self.library_size).filter(|&i| !f[i]).collect()
    }

    /// Successfully measured entries.
    pub fn measured(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.screened.iter().filter_map(|e| e.affinity.map(|a| (e.index, a)))
    }

    pub fn n_failed(&self) -> usize {
        self.screened.iter().filter(|e| e.affinity.is_none()).count()
    }

    pub fn pending_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.left_wins.is_none()).count()
    }

    pub fn completed_pairs(&self) -> usize {
        self.pairs.len() - self.pending_pairs()
    }

    /// Status as reported to clients.
    pub fn reported_status(&self) -> Status {
        if self.suspended && self.status != Status::Done {
            Status::Suspended
        } else {
            self.status
        }
    }
}
