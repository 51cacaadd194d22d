use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, save_checkpoint, write_atomic, Checkpoint};
use super::config::{fraction_count, CampaignConfig, ExpertMode, GroundTruthSource};
use super::metrics::compute_metrics;
use super::outputs::{
    metric_columns, metric_values, screened_columns, screened_values, to_objects, write_csv, OutputPaths,
};
use super::state::{CampaignState, MetricRecord, PendingPair, ScreenedEntry, Status, Transition};
use crate::acquisition::{
    sample_preference_queries, score_candidates, select_batch, AcquisitionSpec, Candidate, CandidateScore,
    ScoringContext,
};
use crate::error::{Error, Result};
use crate::featurization::library::{column, open_table};
use crate::featurization::{Library, Ligand, Normalizer};
use crate::gp::{AffinitySurrogate, Features, KernelKind};
use crate::oracles::{
    ground_truth_utilities, simulate_expert_label, write_ground_truth_csv, GroundTruth, Orientation, SimulatedExpert,
};
use crate::preference::{
    read_preference_log, select_kernel, PreferenceDatum, PreferenceGpModel, PreferenceLogWriter, PreferenceRecord,
};
use crate::rng::{seeded, RoundSeed};

// Streams of the per-iteration round seed.
const STREAM_AFFINITY_FIT: u64 = 0;
const STREAM_PAIR_SCORING: u64 = 1;
const STREAM_PAIR_SAMPLING: u64 = 2;
const STREAM_EXPERT: u64 = 3;
const STREAM_SELECTION: u64 = 4;
const STREAM_RANDOM_ORDER: u64 = 5;
const STREAM_CANDIDATE_SCORING: u64 = 6;

/// Source of measured affinities.
pub trait AffinityOracle: Send + Sync {
    fn measure(&self, ligand: &Ligand) -> Result<f64>;
}

/// Replays a precomputed property column.
#[derive(Debug, Clone)]
pub struct PropertyOracle {
    pub property: String,
}

impl AffinityOracle for PropertyOracle {
    fn measure(&self, ligand: &Ligand) -> Result<f64> {
        match ligand.properties.get(&self.property) {
            Some(v) if v.is_finite() => Ok(*v),
            _ => Err(Error::Oracle {
                id: ligand.id.clone(),
                reason: format!("no finite `{}` value", self.property),
            }),
        }
    }
}

/// Everything a campaign needs besides its configuration and state.
#[derive(Clone)]
pub struct CampaignContext {
    pub library: Arc<Library>,
    pub oracle: Arc<dyn AffinityOracle>,
    pub expert: Option<SimulatedExpert>,
    pub truth: Option<Arc<GroundTruth>>,
}

impl CampaignContext {
    /// Loads the library and builds the oracle, the simulated expert and the
    /// ground truth the configuration asks for.
    pub fn from_config(config: &CampaignConfig) -> Result<Self> {
        config.validate()?;
        let names = config.objective_names();
        let library = config
            .library
            .load(&names, &config.affinity_objective, config.fingerprint)?;
        if library.is_empty() {
            return Err(Error::input("library is empty"));
        }
        let expert = match (config.expert_mode, &config.ground_truth) {
            (ExpertMode::Simulated, _) | (_, GroundTruthSource::Expert) => Some(simulated_expert(config, &library)?),
            _ => None,
        };
        let truth = match &config.ground_truth {
            GroundTruthSource::Expert => {
                let e = expert.as_ref().expect("expert built for expert ground truth");
                Some(Arc::new(ground_truth_utilities(e, &library, &names)?))
            }
            GroundTruthSource::Table {
                path,
                id_column,
                utility_column,
            } => Some(Arc::new(read_ground_truth(path, id_column, utility_column, &library)?)),
            GroundTruthSource::None => None,
        };
        Ok(CampaignContext {
            oracle: Arc::new(PropertyOracle {
                property: config.affinity_objective.clone(),
            }),
            library: Arc::new(library),
            expert: if config.expert_mode == ExpertMode::Simulated {
                expert
            } else {
                None
            },
            truth,
        })
    }
}

/// Expert over objectives min-max scaled by the library ranges, oriented so
/// that 1 is the preferred end.
pub fn simulated_expert(config: &CampaignConfig, library: &Library) -> Result<SimulatedExpert> {
    let names = config.objective_names();
    let utility = config.expert.utility.build(names.len())?;
    let scaling = library
        .property_ranges(&names)
        .into_iter()
        .zip(&config.objectives)
        .map(|((lo, hi), o)| (lo, hi, o.orientation))
        .collect();
    Ok(SimulatedExpert::new(utility, config.expert.label_noise)?.with_scaling(scaling))
}

fn read_ground_truth(
    path: &std::path::Path,
    id_column: &str,
    utility_column: &str,
    library: &Library,
) -> Result<GroundTruth> {
    let mut reader = open_table(path)?;
    let headers = reader.headers()?.clone();
    let (ic, uc) = (column(&headers, id_column)?, column(&headers, utility_column)?);
    let mut u = vec![f64::NAN; library.len()];
    for rec in reader.records() {
        let rec = rec?;
        let id = rec.get(ic).unwrap_or("").trim();
        if let Some(i) = library.position(id) {
            u[i] = rec
                .get(uc)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("ground truth for `{id}` is not a number")))?;
        }
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "ground truth lacks ligand `{}`",
            library.get(i).id
        )));
    }
    GroundTruth::from_utilities(library, u)
}

/// One side of a comparison as shown to the expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSide {
    pub id: String,
    pub smiles: String,
    /// Objective values in raw units.
    pub properties: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depiction_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCard {
    pub pair_id: String,
    pub left: PairSide,
    pub right: PairSide,
}

/// Result of an accepted label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAck {
    pub seq: u64,
    pub completed_pairs: usize,
    pub pending_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub orientation: Orientation,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// A screening campaign: configuration, state and the resources to
/// advance it. Every mutation goes through `&mut self`.
pub struct Campaign {
    config: CampaignConfig,
    ctx: CampaignContext,
    objectives: Vec<String>,
    affinity_index: usize,
    state: CampaignState,
    outputs: Option<OutputPaths>,
    log: Option<PreferenceLogWriter>,
}

impl std::fmt::Debug for Campaign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Campaign")
            .field("iteration", &self.state.iteration)
            .field("status", &self.state.status)
            .finish_non_exhaustive()
    }
}

impl Campaign {
    /// Starts a campaign, or continues it when `config.resume` names an
    /// existing checkpoint.
    pub fn open(config: CampaignConfig) -> Result<Self> {
        if let Some(path) = config.resume.as_ref().filter(|p| p.exists()) {
            let cp = load_checkpoint(path)?;
            let ctx = CampaignContext::from_config(&cp.config)?;
            return Self::restore(cp, ctx);
        }
        let ctx = CampaignContext::from_config(&config)?;
        Self::init(config, ctx)
    }

    /// Initializes a campaign: samples `⌈init_fraction · N⌉` ligands
    /// uniformly without replacement, measures them and records
    /// iteration-0 metrics.
    pub fn init(config: CampaignConfig, ctx: CampaignContext) -> Result<Self> {
        config.validate()?;
        let n = ctx.library.len();
        if n == 0 {
            return Err(Error::input("library is empty"));
        }
        let outputs = config.output_dir.as_ref().map(OutputPaths::new);
        if let Some(o) = &outputs {
            fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
            if o.checkpoint().exists() || o.preferences().exists() {
                return Err(Error::State(format!(
                    "{} already holds a campaign; resume it instead",
                    o.dir.display()
                )));
            }
        }
        let mut rng = seeded(config.seed);
        let initial = sample(&mut rng, n, fraction_count(config.init_fraction, n)).into_vec();
        let state = CampaignState {
            library_digest: ctx.library.digest(),
            library_size: n,
            screened: Vec::new(),
            status: Status::Initializing,
            suspended: false,
            iteration: 0,
            pairs: Vec::new(),
            preference_data: Vec::new(),
            metric_trace: Vec::new(),
            rng,
            round: None,
            transitions: Vec::new(),
        };
        let mut campaign = Self::assemble(config, ctx, state, outputs)?;
        campaign.measure(&initial);
        let m = campaign.current_metrics();
        campaign.state.metric_trace.push(m);
        if campaign.is_exhausted() {
            campaign.transition(Status::Done)?;
        }
        if let Some(o) = &campaign.outputs {
            if let Some(t) = &campaign.ctx.truth {
                write_ground_truth_csv(o.ground_truth(), &campaign.ctx.library, t)?;
            }
            campaign.log = Some(PreferenceLogWriter::open(o.preferences())?);
        }
        campaign.persist()?;
        Ok(campaign)
    }

    /// Continues from a checkpoint with the given resources. Labels present
    /// in the output directory's preference log but newer than the
    /// checkpoint are replayed.
    pub fn restore(checkpoint: Checkpoint, ctx: CampaignContext) -> Result<Self> {
        let Checkpoint { config, state } = checkpoint;
        if state.library_digest != ctx.library.digest() || state.library_size != ctx.library.len() {
            return Err(Error::Integrity(
                "checkpoint was written for a different library".into(),
            ));
        }
        let outputs = config.output_dir.as_ref().map(OutputPaths::new);
        let mut campaign = Self::assemble(config, ctx, state, outputs)?;
        if let Some(o) = campaign.outputs.clone() {
            let records = read_preference_log(o.preferences())?;
            let known = campaign.state.preference_data.len();
            if records.len() < known || records[..known] != campaign.state.preference_data[..] {
                return Err(Error::Integrity("preference log disagrees with checkpoint".into()));
            }
            // Rewrite so a torn tail cannot precede the next append.
            let mut body = String::new();
            for r in &records {
                body.push_str(&serde_json::to_string(r)?);
                body.push('\n');
            }
            write_atomic(&o.preferences(), body.as_bytes())?;
            campaign.log = Some(PreferenceLogWriter::open(o.preferences())?);
            for r in &records[known..] {
                campaign.replay(r)?;
            }
        }
        Ok(campaign)
    }

    fn assemble(
        config: CampaignConfig,
        ctx: CampaignContext,
        state: CampaignState,
        outputs: Option<OutputPaths>,
    ) -> Result<Self> {
        let affinity_index = config
            .affinity_index()
            .ok_or_else(|| Error::input("affinity objective is not an objective"))?;
        Ok(Campaign {
            objectives: config.objective_names(),
            affinity_index,
            config,
            ctx,
            state,
            outputs,
            log: None,
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn library(&self) -> &Arc<Library> {
        &self.ctx.library
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ctx.truth.as_deref()
    }

    pub fn metric_trace(&self) -> &[MetricRecord] {
        &self.state.metric_trace
    }

    pub fn status(&self) -> Status {
        self.state.reported_status()
    }

    pub fn is_done(&self) -> bool {
        self.state.status == Status::Done
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            state: self.state.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        save_checkpoint(path, &self.checkpoint())
    }

    fn is_exhausted(&self) -> bool {
        self.state.iteration >= self.config.n_iterations || self.state.screened.len() >= self.state.library_size
    }

    fn transition(&mut self, to: Status) -> Result<()> {
        let from = self.state.status;
        if !from.allows(to) {
            return Err(Error::State(format!(
                "illegal transition {} -> {}",
                from.name(),
                to.name()
            )));
        }
        let seq = self.state.transitions.last().map_or(0, |t| t.seq + 1);
        log::info!(
            "campaign transition #{seq}: {} -> {} (iteration {})",
            from.name(),
            to.name(),
            self.state.iteration
        );
        self.state.transitions.push(Transition {
            seq,
            iteration: self.state.iteration,
            from,
            to,
        });
        self.state.status = to;
        Ok(())
    }

    fn current_metrics(&self) -> MetricRecord {
        compute_metrics(&self.state, self.ctx.truth.as_deref(), &self.config.accuracy_k)
    }

    /// Measures `indices` in order and moves them to the screened set.
    /// Failures are logged and kept as screened without an affinity.
    fn measure(&mut self, indices: &[usize]) {
        for &i in indices {
            let ligand = self.ctx.library.get(i);
            let affinity = match self.ctx.oracle.measure(ligand) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(v) => {
                    log::warn!("oracle returned {v} for `{}`; marked failed", ligand.id);
                    None
                }
                Err(e) => {
                    log::warn!("{e}; marked failed");
                    None
                }
            };
            self.state.screened.push(ScreenedEntry {
                id: ligand.id.clone(),
                index: i,
                iteration: self.state.iteration,
                affinity,
            });
        }
    }

    /// Writes tables and the checkpoint when an output directory is set.
    fn persist(&self) -> Result<()> {
        let Some(o) = &self.outputs else { return Ok(()) };
        write_csv(
            &o.metrics(),
            &metric_columns(&self.config.accuracy_k),
            self.state.metric_trace.iter().map(metric_values),
        )?;
        write_csv(
            &o.screened(),
            &screened_columns(),
            self.state.screened.iter().map(screened_values),
        )?;
        self.save(o.checkpoint())
    }

    /// Raw objective vector of a screened ligand with its measured affinity.
    fn raw_props(&self, index: usize, affinity: Option<f64>) -> Result<Vec<f64>> {
        let ligand = self.ctx.library.get(index);
        let mut x = self
            .objectives
            .iter()
            .map(|o| {
                ligand
                    .properties
                    .get(o)
                    .copied()
                    .ok_or_else(|| Error::input(format!("ligand `{}` lacks objective `{o}`", ligand.id)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(a) = affinity {
            x[self.affinity_index] = a;
        }
        Ok(x)
    }

    fn measured_affinities(&self) -> HashMap<usize, f64> {
        self.state.measured().collect()
    }

    /// Normalizer over the measured set and the utility model refit from
    /// scratch on every accepted comparison.
    fn fit_utility(&self) -> Result<Option<(Normalizer, PreferenceGpModel<f64>)>> {
        if self.state.preference_data.is_empty() {
            return Ok(None);
        }
        let rows = self
            .state
            .measured()
            .map(|(i, a)| self.raw_props(i, Some(a)))
            .collect::<Result<Vec<_>>>()?;
        let normalizer = Normalizer::fit(rows.iter().map(|r| r.as_slice()));
        let data: Vec<PreferenceDatum<f64>> = self
            .state
            .preference_data
            .iter()
            .map(|r| PreferenceDatum::new(normalizer.apply(&r.winner_props), normalizer.apply(&r.loser_props)))
            .collect();
        let grid = self.config.utility_model.kernels::<f64>(self.objectives.len());
        let model = select_kernel(&data, &grid)?;
        Ok(Some((normalizer, model)))
    }

    /// Acquisition settings with the incumbent filled in from the measured
    /// ligand of highest posterior mean utility.
    fn incumbent(
        &self,
        normalizer: &Normalizer,
        model: &PreferenceGpModel<f64>,
    ) -> Result<(AcquisitionSpec, Option<Vec<f64>>)> {
        let points = self
            .state
            .measured()
            .map(|(i, a)| Ok(normalizer.apply(&self.raw_props(i, Some(a))?)))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = self.config.acquisition.clone();
        if points.is_empty() {
            return Ok((spec, None));
        }
        let means = model.posterior_mean(&points)?;
        let best = (0..means.len())
            .max_by(|&a, &b| means[a].total_cmp(&means[b]))
            .expect("nonempty");
        spec.incumbent.get_or_insert(means[best]);
        Ok((spec, Some(points[best].clone())))
    }

    fn round(&self) -> Result<RoundSeed> {
        self.state
            .round
            .ok_or_else(|| Error::State("no iteration in progress".into()))
    }

    fn check_active(&self) -> Result<()> {
        if self.state.status == Status::Done {
            return Err(Error::Finished);
        }
        if self.state.suspended {
            return Err(Error::State("campaign is suspended".into()));
        }
        Ok(())
    }

    /// Scores the measured set and queues comparisons among its top
    /// candidates. Random selection queues none. Before any comparison
    /// exists the top candidates are a random subset.
    pub fn begin_iteration(&mut self) -> Result<()> {
        self.check_active()?;
        if !matches!(self.state.status, Status::Initializing | Status::Measuring) {
            return Err(Error::State(format!(
                "cannot begin an iteration while {}",
                self.state.status.name()
            )));
        }
        let round = RoundSeed::draw(&mut self.state.rng);
        let mut pairs = Vec::new();
        if self.config.uses_utility_model() {
            let measured: Vec<(usize, f64)> = self.state.measured().collect();
            let scores = match self.fit_utility()? {
                None => {
                    let mut rng = round.stream(STREAM_RANDOM_ORDER);
                    measured
                        .iter()
                        .map(|&(i, _)| CandidateScore {
                            ligand_id: self.ctx.library.get(i).id.clone(),
                            acquisition_value: rng.random::<f64>(),
                            predicted_utility_mean: f64::NAN,
                            predicted_utility_var: f64::NAN,
                        })
                        .collect::<Vec<_>>()
                }
                Some((normalizer, model)) => {
                    let (spec, incumbent_point) = self.incumbent(&normalizer, &model)?;
                    let ctx = ScoringContext {
                        affinity: None,
                        utility: &model,
                        normalizer: &normalizer,
                        affinity_index: self.affinity_index,
                        incumbent_point,
                    };
                    let props = measured
                        .iter()
                        .map(|&(i, a)| self.raw_props(i, Some(a)))
                        .collect::<Result<Vec<_>>>()?;
                    let candidates: Vec<Candidate<'_>> = measured
                        .iter()
                        .zip(props)
                        .map(|(&(i, a), props)| {
                            let l = self.ctx.library.get(i);
                            Candidate {
                                id: &l.id,
                                fingerprint: &l.fingerprint,
                                props,
                                stream: i as u64,
                                known_affinity: Some(a),
                            }
                        })
                        .collect();
                    let seed = RoundSeed::draw(&mut round.stream(STREAM_PAIR_SCORING));
                    score_candidates(&ctx, &candidates, &spec, &seed)?
                }
            };
            if scores.len() >= 2 {
                let queries = sample_preference_queries(
                    &scores,
                    self.config.top_k_for_pairs,
                    self.config.pairs_per_iteration,
                    &mut round.stream(STREAM_PAIR_SAMPLING),
                )?;
                let lib = &self.ctx.library;
                pairs = queries
                    .into_iter()
                    .enumerate()
                    .map(|(k, (a, b))| PendingPair {
                        pair_id: format!("i{}-p{k}", self.state.iteration + 1),
                        left: lib.position(&a).expect("scored ids come from the library"),
                        right: lib.position(&b).expect("scored ids come from the library"),
                        left_wins: None,
                    })
                    .collect();
            } else {
                log::warn!("fewer than two measured ligands; no comparisons this iteration");
            }
        }
        self.state.round = Some(round);
        self.state.pairs = pairs;
        self.transition(Status::AwaitingLabels)?;
        self.persist()
    }

    /// First unlabeled pair of the current queue.
    pub fn next_pair(&self) -> Result<Option<PairCard>> {
        if self.state.status == Status::Done {
            return Err(Error::Finished);
        }
        if self.state.status != Status::AwaitingLabels || self.state.suspended {
            return Err(Error::State(format!(
                "no pairs are served while {}",
                self.status().name()
            )));
        }
        let Some(p) = self.state.pairs.iter().find(|p| p.left_wins.is_none()) else {
            return Ok(None);
        };
        let affinities = self.measured_affinities();
        let side = |i: usize| -> Result<PairSide> {
            let l = self.ctx.library.get(i);
            let props = self.raw_props(i, affinities.get(&i).copied())?;
            Ok(PairSide {
                id: l.id.clone(),
                smiles: l.smiles.clone(),
                properties: self.objectives.iter().cloned().zip(props).collect(),
                depiction_url: None,
            })
        };
        Ok(Some(PairCard {
            pair_id: p.pair_id.clone(),
            left: side(p.left)?,
            right: side(p.right)?,
        }))
    }

    /// Records a label. The first label for a pair wins; later ones are
    /// rejected without touching the state.
    pub fn submit_label(
        &mut self,
        pair_id: &str,
        left_wins: bool,
        annotator: Option<String>,
        timestamp_ms: Option<u64>,
    ) -> Result<LabelAck> {
        self.check_active()?;
        if self.state.status != Status::AwaitingLabels {
            return Err(Error::State(format!(
                "labels are not accepted while {}",
                self.state.status.name()
            )));
        }
        let k = self
            .state
            .pairs
            .iter()
            .position(|p| p.pair_id == pair_id)
            .ok_or_else(|| Error::UnknownPair(pair_id.to_string()))?;
        let pair = &self.state.pairs[k];
        if pair.left_wins.is_some() {
            return Err(Error::AlreadyLabeled(pair_id.to_string()));
        }
        let (w, l) = if left_wins {
            (pair.left, pair.right)
        } else {
            (pair.right, pair.left)
        };
        let affinities = self.measured_affinities();
        let record = PreferenceRecord {
            seq: self.state.preference_data.len() as u64,
            iteration: self.state.iteration + 1,
            pair_id: pair_id.to_string(),
            winner_id: self.ctx.library.get(w).id.clone(),
            loser_id: self.ctx.library.get(l).id.clone(),
            winner_props: self.raw_props(w, affinities.get(&w).copied())?,
            loser_props: self.raw_props(l, affinities.get(&l).copied())?,
            timestamp_ms: timestamp_ms.unwrap_or_else(now_ms),
            annotator,
        };
        // The log is the durable copy; write it before the state changes.
        if let Some(log) = self.log.as_mut() {
            log.append(&record)?;
        }
        Ok(self.accept(k, left_wins, record))
    }

    fn accept(&mut self, k: usize, left_wins: bool, record: PreferenceRecord) -> LabelAck {
        let seq = record.seq;
        self.state.pairs[k].left_wins = Some(left_wins);
        self.state.preference_data.push(record);
        LabelAck {
            seq,
            completed_pairs: self.state.completed_pairs(),
            pending_pairs: self.state.pending_pairs(),
        }
    }

    /// Re-applies a logged label after a restart.
    fn replay(&mut self, r: &PreferenceRecord) -> Result<()> {
        let k = self
            .state
            .pairs
            .iter()
            .position(|p| p.pair_id == r.pair_id && p.left_wins.is_none())
            .ok_or_else(|| Error::Integrity(format!("logged pair `{}` is not outstanding", r.pair_id)))?;
        if r.seq != self.state.preference_data.len() as u64 {
            return Err(Error::Integrity(format!("logged label {} is out of sequence", r.seq)));
        }
        let left = &self.ctx.library.get(self.state.pairs[k].left).id;
        let left_wins = &r.winner_id == left;
        self.accept(k, left_wins, r.clone());
        Ok(())
    }

    /// Fits both models, scores every unscreened ligand, selects and
    /// measures a batch, and appends the iteration's metrics.
    pub fn acquire(&mut self) -> Result<()> {
        self.check_active()?;
        if self.state.status != Status::AwaitingLabels {
            return Err(Error::State(format!(
                "cannot acquire while {}",
                self.state.status.name()
            )));
        }
        if self.state.pending_pairs() > 0 {
            return Err(Error::State(format!(
                "{} comparisons are still pending",
                self.state.pending_pairs()
            )));
        }
        let round = self.round()?;
        let unscreened = self.state.unscreened();
        let batch = fraction_count(self.config.batch_fraction, self.state.library_size).min(unscreened.len());
        let model_ready = !self.state.preference_data.is_empty() && self.state.measured().next().is_some();
        if self.config.uses_utility_model() && !model_ready {
            log::warn!("no comparisons or measurements to model yet; selecting at random");
        }
        let selected: Vec<usize> = if self.config.uses_utility_model() && model_ready {
            self.select_by_model(&unscreened, batch, &round)?
        } else {
            let mut rng = round.stream(STREAM_SELECTION);
            sample(&mut rng, unscreened.len(), batch)
                .into_iter()
                .map(|j| unscreened[j])
                .collect()
        };
        self.transition(Status::Acquiring)?;
        self.transition(Status::Measuring)?;
        self.state.iteration += 1;
        self.measure(&selected);
        let m = self.current_metrics();
        self.state.metric_trace.push(m);
        self.state.pairs.clear();
        self.state.round = None;
        if self.is_exhausted() {
            self.transition(Status::Done)?;
        }
        self.persist()
    }

    fn select_by_model(&self, unscreened: &[usize], batch: usize, round: &RoundSeed) -> Result<Vec<usize>> {
        let clock = Instant::now();
        let (normalizer, utility) = self
            .fit_utility()?
            .ok_or_else(|| Error::State("no comparisons to fit the utility model".into()))?;
        let measured: Vec<(usize, f64)> = self.state.measured().collect();
        if measured.is_empty() {
            return Err(Error::State("no measured ligands to fit the affinity model".into()));
        }
        let inputs: Vec<Features<f64>> = measured
            .iter()
            .map(|&(i, _)| Features::Bits(self.ctx.library.get(i).fingerprint.clone()))
            .collect();
        let targets: Vec<f64> = measured.iter().map(|&(_, a)| a).collect();
        let affinity = AffinitySurrogate::fit(
            inputs,
            &targets,
            KernelKind::Tanimoto,
            &self.config.affinity_model,
            &mut round.stream(STREAM_AFFINITY_FIT),
        )?;
        if let Some(w) = &affinity.warning {
            log::warn!("affinity model: {w}");
        }
        let fitted = clock.elapsed();
        let (spec, incumbent_point) = self.incumbent(&normalizer, &utility)?;
        let ctx = ScoringContext {
            affinity: Some(&affinity),
            utility: &utility,
            normalizer: &normalizer,
            affinity_index: self.affinity_index,
            incumbent_point,
        };
        let candidates = unscreened
            .iter()
            .map(|&i| {
                let l = self.ctx.library.get(i);
                Ok(Candidate {
                    id: &l.id,
                    fingerprint: &l.fingerprint,
                    props: self.raw_props(i, None)?,
                    stream: i as u64,
                    known_affinity: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let seed = RoundSeed::draw(&mut round.stream(STREAM_CANDIDATE_SCORING));
        let scores = score_candidates(&ctx, &candidates, &spec, &seed)?;
        log::debug!(
            "utility model on {} points, affinity model on {}: fitted in {:.2?}, scored {} candidates in {:.2?}",
            utility.train_points.len(),
            measured.len(),
            fitted,
            candidates.len(),
            clock.elapsed() - fitted
        );
        let ids = select_batch(&scores, batch, &spec, &mut round.stream(STREAM_SELECTION))?;
        Ok(ids
            .iter()
            .map(|id| {
                self.ctx
                    .library
                    .position(id)
                    .expect("selected ids come from the library")
            })
            .collect())
    }

    /// One full iteration with the simulated expert answering every query.
    pub fn run_iteration(&mut self) -> Result<()> {
        self.begin_iteration()?;
        self.label_with_expert()?;
        self.acquire()
    }

    /// Answers every pending comparison with the simulated expert.
    pub fn label_with_expert(&mut self) -> Result<()> {
        if self.state.pending_pairs() == 0 {
            return Ok(());
        }
        let expert = self
            .ctx
            .expert
            .clone()
            .ok_or_else(|| Error::State("live campaign is waiting for labels".into()))?;
        let mut rng = self.round()?.stream(STREAM_EXPERT);
        let affinities = self.measured_affinities();
        // Answered pairs still draw, so a resumed round labels like an
        // uninterrupted one.
        let pairs: Vec<PendingPair> = self.state.pairs.clone();
        for p in pairs {
            let a = self.raw_props(p.left, affinities.get(&p.left).copied())?;
            let b = self.raw_props(p.right, affinities.get(&p.right).copied())?;
            let left_wins = simulate_expert_label(&expert, &a, &b, &mut rng)?;
            if p.left_wins.is_none() {
                self.submit_label(&p.pair_id, left_wins, Some("simulated".into()), Some(0))?;
            }
        }
        Ok(())
    }

    /// Runs iterations until the budget is spent.
    pub fn run(&mut self) -> Result<&[MetricRecord]> {
        while !self.is_done() {
            if self.state.status == Status::AwaitingLabels {
                self.label_with_expert()?;
                self.acquire()?;
            } else {
                self.run_iteration()?;
            }
        }
        Ok(&self.state.metric_trace)
    }

    pub fn suspend(&mut self) -> Result<()> {
        if self.state.status == Status::Done {
            return Err(Error::Finished);
        }
        self.state.suspended = true;
        self.persist()
    }

    pub fn resume(&mut self) -> Result<()> {
        if self.state.status == Status::Done {
            return Err(Error::Finished);
        }
        self.state.suspended = false;
        self.persist()
    }

    /// Library-wide objective ranges with orientation hints.
    pub fn property_ranges(&self) -> Vec<PropertyRange> {
        self.ctx
            .library
            .property_ranges(&self.objectives)
            .into_iter()
            .zip(&self.config.objectives)
            .map(|((min, max), o)| PropertyRange {
                name: o.name.clone(),
                min,
                max,
                orientation: o.orientation,
            })
            .collect()
    }

    /// Metric trace as column-keyed rows, matching `metrics.csv`.
    pub fn metric_rows(&self) -> Vec<serde_json::Map<String, serde_json::Value>> {
        to_objects(
            &metric_columns(&self.config.accuracy_k),
            self.state.metric_trace.iter().map(metric_values),
        )
    }

    /// Screened list as column-keyed rows, matching `screened.csv`.
    pub fn screened_rows(&self) -> Vec<serde_json::Map<String, serde_json::Value>> {
        to_objects(&screened_columns(), self.state.screened.iter().map(screened_values))
    }
}
