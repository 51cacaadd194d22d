//! Campaign orchestration: initial sampling, iterative
//! measure/fit/elicit/acquire cycles, metric tracking and persistence.
//!
//! A [`Campaign`] advances through `begin_iteration` (queue comparisons),
//! `submit_label` (one per queued pair) and `acquire` (select and measure a
//! batch). [`Campaign::run_iteration`] chains the three with the simulated
//! expert.

mod campaign;
mod checkpoint;
mod config;
mod metrics;
mod outputs;
mod state;

pub use campaign::{
    simulated_expert, AffinityOracle, Campaign, CampaignContext, LabelAck, PairCard, PairSide, PropertyOracle,
    PropertyRange,
};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, write_atomic, Checkpoint, FORMAT_VERSION,
};
pub use config::{
    fraction_count, CampaignConfig, ExpertConfig, ExpertMode, GroundTruthSource, ObjectiveSpec, CONFIG_VERSION,
};
pub use metrics::{compute_metrics, regret, top_k_accuracy};
pub use outputs::{
    csv_bytes, metric_columns, metric_values, screened_columns, screened_values, to_objects, write_csv, OutputPaths,
    CHECKPOINT_FILE, GROUND_TRUTH_FILE, METRICS_FILE, PREFERENCES_FILE, SCREENED_FILE,
};
pub use state::{CampaignState, MetricRecord, PendingPair, ScreenedEntry, Status, Transition};
