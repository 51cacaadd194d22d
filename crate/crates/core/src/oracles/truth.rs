use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expert::SimulatedExpert;
use crate::error::{Error, Result};
use crate::featurization::Library;

/// Post-hoc ground truth. Never consulted during selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True utility per ligand, in library order.
    pub utilities: Vec<f64>,
    pub u_star: f64,
    /// Library positions sorted by decreasing utility, ties by id.
    pub ranking: Vec<usize>,
}

impl GroundTruth {
    pub fn from_utilities(library: &Library, utilities: Vec<f64>) -> Result<Self> {
        if utilities.len() != library.len() || library.is_empty() {
            return Err(Error::input("one utility per ligand required"));
        }
        let mut ranking: Vec<usize> = (0..utilities.len()).collect();
        ranking.sort_by(|&a, &b| {
            utilities[b]
                .total_cmp(&utilities[a])
                .then_with(|| library.get(a).id.cmp(&library.get(b).id))
        });
        Ok(GroundTruth {
            u_star: utilities[ranking[0]],
            utilities,
            ranking,
        })
    }

    /// Positions of the `k` best ligands.
    pub fn top_k(&self, k: usize) -> HashSet<usize> {
        self.ranking.iter().take(k).copied().collect()
    }

    pub fn top_k_ids(&self, library: &Library, k: usize) -> HashSet<String> {
        self.ranking
            .iter()
            .take(k)
            .map(|&i| library.get(i).id.clone())
            .collect()
    }
}

/// Evaluates the expert's hidden utility on every ligand.
pub fn ground_truth_utilities(
    expert: &SimulatedExpert,
    library: &Library,
    objectives: &[String],
) -> Result<GroundTruth> {
    let mut utilities = Vec::with_capacity(library.len());
    for l in library.ligands() {
        let x = objectives
            .iter()
            .map(|o| {
                l.properties
                    .get(o)
                    .copied()
                    .ok_or_else(|| Error::input(format!("ligand `{}` lacks objective `{o}`", l.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        utilities.push(expert.utility_of(&x)?);
    }
    GroundTruth::from_utilities(library, utilities)
}

/// Writes `id,utility,rank` for audit, rank 1 being the best.
pub fn write_ground_truth_csv(path: impl AsRef<Path>, library: &Library, truth: &GroundTruth) -> Result<()> {
    let path = path.as_ref();
    let mut rank = BTreeMap::new();
    for (r, &i) in truth.ranking.iter().enumerate() {
        rank.insert(i, r + 1);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "utility", "rank"])?;
    for (i, l) in library.ligands().iter().enumerate() {
        w.write_record([l.id.clone(), format!("{}", truth.utilities[i]), rank[&i].to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
