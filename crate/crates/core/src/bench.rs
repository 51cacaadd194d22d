//! Evaluation harnesses shared by the command line and the acceptance run:
//! preference-model accuracy on benchmark utilities, acquisition sweeps
//! over a synthesized library, and the interaction-order study.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::analysis::{fit_linear_preference, interaction_pairs, LinearPreferenceOptions};
use crate::error::{Error, Result};
use crate::oracles::{benchmark_pairs, BenchmarkFunction, BenchmarkKind, LibrarySource};
use crate::preference::{evaluate_preference_model, PreferenceDatum, PreferenceEval, UtilityGrid};
use crate::rng::seeded;
use crate::screening::{Campaign, CampaignConfig, CampaignContext, MetricRecord};
use crate::stats::MeanStd;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceBenchOptions {
    pub functions: Vec<BenchmarkKind>,
    /// Input dimension for functions without a fixed one.
    pub dimension: usize,
    pub pool: usize,
    pub pairs: usize,
    pub folds: usize,
    pub split: f64,
    pub label_noise: f64,
    pub seed: u64,
    pub grid: UtilityGrid,
}

impl Default for PreferenceBenchOptions {
    fn default() -> Self {
        PreferenceBenchOptions {
            functions: vec![
                BenchmarkKind::Ackley,
                BenchmarkKind::Levy,
                BenchmarkKind::Hartmann6,
                BenchmarkKind::Dropwave,
            ],
            dimension: 4,
            pool: 100,
            pairs: 1200,
            folds: 20,
            split: 0.8,
            label_noise: 0.0,
            seed: 7,
            grid: UtilityGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreferenceBenchRow {
    pub function: BenchmarkKind,
    pub dimension: usize,
    pub eval: PreferenceEval,
    pub seconds: f64,
}

pub fn preference_benchmark(opts: &PreferenceBenchOptions) -> Result<Vec<PreferenceBenchRow>> {
    opts.functions
        .iter()
        .map(|&kind| {
            let t = Instant::now();
            let f = BenchmarkFunction::natural(kind, opts.dimension);
            let pairs = benchmark_pairs(&f, opts.pool, opts.pairs, opts.label_noise, &mut seeded(opts.seed))?;
            let eval = evaluate_preference_model(&pairs, &opts.grid, opts.folds, opts.split, opts.seed)?;
            Ok(PreferenceBenchRow {
                function: kind,
                dimension: f.dimension,
                eval,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub kinds: Vec<AcquisitionKind>,
    pub seeds: Vec<u64>,
    /// Template for every run; acquisition kind and seed are overridden.
    pub base: CampaignConfig,
}

impl SweepOptions {
    /// 20k synthesized ligands, five seeds, every acquisition kind, with the
    /// reduced Monte Carlo and hyperparameter-search settings that keep the
    /// whole sweep on one core within half an hour.
    pub fn standard() -> Self {
        let mut base = CampaignConfig::default();
        base.library = LibrarySource::Synthetic {
            n: 20_000,
            seed: 7,
            table: None,
        };
        base.accuracy_k = vec![100];
        base.acquisition.mc_affinity_samples = 8;
        base.affinity_model.max_hyperopt_points = 256;
        base.affinity_model.restarts = 1;
        SweepOptions {
            kinds: AcquisitionKind::ALL.to_vec(),
            seeds: (0..5).collect(),
            base,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub kind: AcquisitionKind,
    pub seed: u64,
    pub trace: Vec<MetricRecord>,
    pub seconds: f64,
}

impl SweepRun {
    pub fn final_record(&self) -> Option<&MetricRecord> {
        self.trace.last()
    }

    pub fn regret_nonincreasing(&self) -> bool {
        let r: Vec<f64> = self.trace.iter().filter_map(|m| m.regret).collect();
        r.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Runs every (kind, seed) campaign against one shared library and expert.
/// `on_run` sees each run as it finishes.
pub fn synthetic_sweep(opts: &SweepOptions, mut on_run: impl FnMut(&SweepRun)) -> Result<Vec<SweepRun>> {
    let mut base = opts.base.clone();
    base.output_dir = None;
    base.resume = None;
    base.validate()?;
    let ctx = CampaignContext::from_config(&base)?;
    if ctx.truth.is_none() {
        return Err(Error::input("a sweep needs a ground-truth utility"));
    }
    let mut runs = Vec::new();
    for &kind in &opts.kinds {
        for &seed in &opts.seeds {
            let mut cfg = base.clone();
            cfg.acquisition.kind = kind;
            cfg.seed = seed;
            let t = Instant::now();
            let mut campaign = Campaign::init(cfg, ctx.clone())?;
            let trace = campaign.run()?.to_vec();
            let run = SweepRun {
                kind,
                seed,
                trace,
                seconds: t.elapsed().as_secs_f64(),
            };
            on_run(&run);
            runs.push(run);
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, Serialize)]
pub struct KindSummary {
    pub kind: AcquisitionKind,
    pub final_regret: MeanStd,
    /// Final accuracy at the first configured k.
    pub final_accuracy: MeanStd,
    pub all_nonincreasing: bool,
}

pub fn summarize_sweep(runs: &[SweepRun]) -> Vec<KindSummary> {
    let mut kinds: Vec<AcquisitionKind> = Vec::new();
    for r in runs {
        if !kinds.contains(&r.kind) {
            kinds.push(r.kind);
        }
    }
    kinds
        .into_iter()
        .map(|kind| {
            let mine: Vec<&SweepRun> = runs.iter().filter(|r| r.kind == kind).collect();
            let last = |f: fn(&MetricRecord) -> Option<f64>| -> Vec<f64> {
                mine.iter().filter_map(|r| r.final_record().and_then(f)).collect()
            };
            KindSummary {
                kind,
                final_regret: MeanStd::of(&last(|m| m.regret)),
                final_accuracy: MeanStd::of(&last(|m| m.top_k_accuracy.first().copied().flatten())),
                all_nonincreasing: mine.iter().all(|r| r.regret_nonincreasing()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionOptions {
    pub max_order: usize,
    pub folds: usize,
    pub split: f64,
    pub seed: u64,
    pub include_squares: bool,
}

impl Default for InteractionOptions {
    fn default() -> Self {
        InteractionOptions {
            max_order: 4,
            folds: 20,
            split: 0.8,
            seed: 0,
            include_squares: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InteractionRow {
    pub order: usize,
    pub eval: PreferenceEval,
}

/// Fits the linear preference model at every order from 1 to `max_order`.
pub fn interaction_study(pairs: &[PreferenceDatum<f64>], opts: &InteractionOptions) -> Result<Vec<InteractionRow>> {
    let dim = pairs.first().map_or(0, |p| p.winner_props.len());
    if opts.max_order == 0 || opts.max_order > dim {
        return Err(Error::input(format!("max_order must lie in 1..={dim}")));
    }
    (1..=opts.max_order)
        .map(|order| {
            let eval = fit_linear_preference(
                pairs,
                &LinearPreferenceOptions {
                    order,
                    folds: opts.folds,
                    split: opts.split,
                    seed: opts.seed,
                    include_squares: opts.include_squares,
                },
            )?;
            Ok(InteractionRow { order, eval })
        })
        .collect()
}

/// Synthetic comparisons from a 4-input utility with three- and four-way
/// terms.
pub fn synthetic_interaction_pairs(n_pairs: usize, seed: u64) -> Vec<PreferenceDatum<f64>> {
    interaction_pairs(n_pairs, &mut seeded(seed))
}
