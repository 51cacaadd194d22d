use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, AcquisitionSpec};
use crate::error::{Error, Result};
use crate::featurization::FingerprintParams;
use crate::gp::HyperOptions;
use crate::oracles::{BenchmarkKind, LibrarySource, Orientation, UtilitySpec};
use crate::preference::UtilityGrid;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    /// Which end the expert is expected to prefer; used for display and for
    /// scaling the simulated expert's inputs.
    #[serde(default)]
    pub orientation: Orientation,
}

impl ObjectiveSpec {
    pub fn new(name: impl Into<String>, orientation: Orientation) -> Self {
        ObjectiveSpec {
            name: name.into(),
            orientation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertMode {
    #[default]
    Simulated,
    Live,
}

/// Hidden utility of the simulated expert. The default is Ackley on the
/// half box `[-32.768, 0]`, so its optimum sits where every objective is at
/// its preferred end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    pub utility: UtilitySpec,
    pub label_noise: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            utility: UtilitySpec::Benchmark {
                function: BenchmarkKind::Ackley,
                bounds: Some((-32.768, 0.0)),
            },
            label_noise: 0.0,
        }
    }
}

/// Where post-hoc metrics get their true utilities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundTruthSource {
    /// The configured expert utility evaluated on every ligand.
    #[default]
    Expert,
    /// A table of `id,utility` rows covering the library.
    Table {
        path: PathBuf,
        #[serde(default = "default_id")]
        id_column: String,
        #[serde(default = "default_utility")]
        utility_column: String,
    },
    /// No ground truth; regret and accuracy are reported as missing.
    None,
}

fn default_id() -> String {
    "id".into()
}

fn default_utility() -> String {
    "utility".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub version: u32,
    pub objectives: Vec<ObjectiveSpec>,
    /// Objective measured by the oracle and predicted by the affinity model.
    pub affinity_objective: String,
    pub init_fraction: f64,
    pub batch_fraction: f64,
    pub n_iterations: u32,
    pub pairs_per_iteration: usize,
    pub top_k_for_pairs: usize,
    pub acquisition: AcquisitionSpec,
    pub seed: u64,
    pub expert_mode: ExpertMode,
    pub expert: ExpertConfig,
    pub library: LibrarySource,
    pub fingerprint: FingerprintParams,
    pub affinity_model: HyperOptions,
    pub utility_model: UtilityGrid,
    /// Cut-offs for top-k accuracy.
    pub accuracy_k: Vec<usize>,
    pub ground_truth: GroundTruthSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Checkpoint to continue from when it exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            version: CONFIG_VERSION,
            objectives: vec![
                ObjectiveSpec::new("affinity", Orientation::Minimize),
                ObjectiveSpec::new("mw", Orientation::Minimize),
                ObjectiveSpec::new("logp", Orientation::Maximize),
                ObjectiveSpec::new("rotatable_bonds", Orientation::Minimize),
            ],
            affinity_objective: "affinity".into(),
            init_fraction: 0.01,
            batch_fraction: 0.005,
            n_iterations: 10,
            pairs_per_iteration: 200,
            top_k_for_pairs: 50,
            acquisition: AcquisitionSpec::default(),
            seed: 0,
            expert_mode: ExpertMode::Simulated,
            expert: ExpertConfig::default(),
            library: LibrarySource::Synthetic {
                n: 1000,
                seed: 0,
                table: None,
            },
            fingerprint: FingerprintParams::default(),
            affinity_model: HyperOptions::default(),
            utility_model: UtilityGrid::default(),
            accuracy_k: vec![100],
            ground_truth: GroundTruthSource::Expert,
            output_dir: None,
            resume: None,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// `⌈fraction · n⌉`, tolerant of representation error in the product.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let c = (x - 1e-9 * x.abs().max(1.0)).ceil();
    (c.max(0.0) as usize).min(n)
}

impl CampaignConfig {
    /// Parses and validates a JSON document. Errors carry the path of the
    /// offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: CampaignConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn objective_names(&self) -> Vec<String> {
        self.objectives.iter().map(|o| o.name.clone()).collect()
    }

    pub fn affinity_index(&self) -> Option<usize> {
        self.objectives.iter().position(|o| o.name == self.affinity_objective)
    }

    pub fn uses_utility_model(&self) -> bool {
        self.acquisition.kind != AcquisitionKind::Random
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.objectives.is_empty() {
            return Err(invalid("objectives", "at least one objective is required"));
        }
        let mut seen = HashSet::new();
        for (i, o) in self.objectives.iter().enumerate() {
            if o.name.trim().is_empty() {
                return Err(invalid(&format!("objectives[{i}].name"), "empty objective name"));
            }
            if !seen.insert(o.name.as_str()) {
                return Err(invalid(
                    &format!("objectives[{i}].name"),
                    format!("duplicate objective `{}`", o.name),
                ));
            }
        }
        if self.affinity_index().is_none() {
            return Err(invalid(
                "affinity_objective",
                format!("`{}` is not among the objectives", self.affinity_objective),
            ));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(invalid(
                "init_fraction",
                format!("{} is outside (0, 1]", self.init_fraction),
            ));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(invalid(
                "batch_fraction",
                format!("{} is outside (0, 1]", self.batch_fraction),
            ));
        }
        let total = self.init_fraction + f64::from(self.n_iterations) * self.batch_fraction;
        if total > 1.0 + 1e-9 {
            return Err(invalid(
                "batch_fraction",
                format!("init_fraction + n_iterations * batch_fraction = {total} exceeds 1"),
            ));
        }
        if self.uses_utility_model() {
            if self.pairs_per_iteration == 0 {
                return Err(invalid("pairs_per_iteration", "must be at least 1"));
            }
            if self.top_k_for_pairs < 2 {
                return Err(invalid("top_k_for_pairs", "must be at least 2"));
            }
        }
        self.acquisition
            .validate()
            .map_err(|e| invalid("acquisition", strip(e)))?;
        if self.expert_mode == ExpertMode::Simulated || self.ground_truth == GroundTruthSource::Expert {
            self.expert
                .utility
                .build(self.objectives.len())
                .map_err(|e| invalid("expert.utility", strip(e)))?;
            if !(0.0..0.5).contains(&self.expert.label_noise) {
                return Err(invalid("expert.label_noise", "must lie in [0, 0.5)"));
            }
        }
        match &self.library {
            LibrarySource::Synthetic { n: 0, .. } => return Err(invalid("library.n", "library is empty")),
            LibrarySource::Synthetic { .. } | LibrarySource::Csv { .. } => {}
        }
        if !matches!(self.fingerprint.n_bits, 64..=1_048_576) || self.fingerprint.n_bits % 64 != 0 {
            return Err(invalid("fingerprint.n_bits", "must be a positive multiple of 64"));
        }
        if self.affinity_model.max_hyperopt_points < 2 {
            return Err(invalid("affinity_model.max_hyperopt_points", "must be at least 2"));
        }
        self.utility_model
            .validate()
            .map_err(|e| invalid("utility_model", strip(e)))?;
        if self.accuracy_k.is_empty() {
            return Err(invalid("accuracy_k", "at least one cut-off is required"));
        }
        if let Some(i) = self.accuracy_k.iter().position(|&k| k == 0) {
            return Err(invalid(&format!("accuracy_k[{i}]"), "must be at least 1"));
        }
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Input(m) => m,
        e => e.to_string(),
    }
}
