//! Library construction for desk-scale campaigns.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurization::library::{column, open_table};
use crate::featurization::{load_library_csv, parse_smiles, FingerprintParams, Library, LibrarySchema, Ligand};
use crate::rng::RoundSeed;

/// Docking-score table replayed as the affinity oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSource {
    pub path: PathBuf,
    #[serde(default = "default_table_id")]
    pub id_column: String,
    #[serde(default = "default_smiles")]
    pub smiles_column: String,
    /// Column holding the affinity of the chosen target.
    pub affinity_column: String,
}

fn default_table_id() -> String {
    "inchikey".into()
}

fn default_smiles() -> String {
    "smiles".into()
}

fn default_id() -> String {
    "id".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LibrarySource {
    /// A table carrying every objective as a column.
    Csv {
        path: PathBuf,
        #[serde(default = "default_id")]
        id_column: String,
        #[serde(default = "default_smiles")]
        smiles_column: String,
    },
    /// `n` ligands, from a replayed table when given, otherwise generated.
    Synthetic {
        n: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<TableSource>,
    },
}

impl LibrarySource {
    pub fn load(&self, objectives: &[String], affinity: &str, fp: FingerprintParams) -> Result<Library> {
        match self {
            LibrarySource::Csv {
                path,
                id_column,
                smiles_column,
            } => {
                let schema = LibrarySchema {
                    id_column: id_column.clone(),
                    smiles_column: smiles_column.clone(),
                    properties: objectives.to_vec(),
                };
                Ok(load_library_csv(path, &schema, fp)?.library)
            }
            LibrarySource::Synthetic { n, seed, table } => {
                make_synthetic_library(*n, objectives, affinity, *seed, table.as_ref(), fp)
            }
        }
    }
}

pub type SyntheticLibrary = Library;

/// Chain fragments; each attaches to its neighbours through its first and
/// last atom.
const INTERNAL: [&str; 16] = [
    "C",
    "CC",
    "C(C)",
    "C(=O)",
    "N",
    "O",
    "c1ccccc1",
    "c1ccncc1",
    "C1CCNCC1",
    "C(F)(F)",
    "S(=O)(=O)",
    "C(=O)N",
    "C#C",
    "c1ccc2ccccc2c1",
    "C1CC1",
    "c1ccsc1",
];
/// Caps written for the start and the end of the chain.
const TERMINAL_START: [&str; 9] = ["F", "Cl", "Br", "N#C", "O", "N", "FC(F)(F)", "CO", "OC(=O)"];
const TERMINAL_END: [&str; 9] = ["F", "Cl", "Br", "C#N", "O", "N", "C(F)(F)F", "OC", "C(=O)O"];

const AFFINITY_RANGE: (f64, f64) = (-12.0, -4.0);
const AFFINITY_NOISE: f64 = 0.2;

/// Range an objective is drawn from when it has to be synthesized.
fn synth_range(name: &str) -> (f64, f64, bool) {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "mw" | "molecular_weight" | "molwt" => (150.0, 600.0, false),
        "logp" | "clogp" | "lipophilicity" => (-2.0, 6.0, false),
        "rotatable_bonds" | "rotb" | "n_rotatable_bonds" => (0.0, 15.0, true),
        _ => (0.0, 1.0, false),
    }
}

fn draw_other<R: Rng>(rng: &mut R, name: &str) -> f64 {
    let (lo, hi, integer) = synth_range(name);
    if integer {
        rng.random_range(lo as i64..=hi as i64) as f64
    } else {
        rng.random_range(lo..hi)
    }
}

/// Builds `n` ligands deterministically from `seed`.
///
/// With a table, `n` rows with a finite affinity and a parseable SMILES are
/// subsampled and the affinity column is renamed to `affinity`; objectives
/// the table lacks are synthesized. Without a table, molecules are random
/// fragment chains whose hidden affinity is an additive fragment score
/// rescaled to [-12, -4] kcal/mol plus noise.
pub fn make_synthetic_library(
    n: usize,
    objectives: &[String],
    affinity: &str,
    seed: u64,
    table: Option<&TableSource>,
    fp: FingerprintParams,
) -> Result<Library> {
    if n == 0 {
        return Err(Error::input("library size must be at least 1"));
    }
    let streams = RoundSeed::from_u64(seed);
    match table {
        Some(t) => from_table(n, objectives, affinity, t, &streams, fp),
        None => generate(n, objectives, affinity, &streams, fp),
    }
}

fn other_props(
    objectives: &[String],
    affinity: &str,
    streams: &RoundSeed,
    i: usize,
    props: &mut BTreeMap<String, f64>,
) {
    let mut rng = streams.stream(1_000_000 + i as u64);
    for name in objectives {
        if name != affinity && !props.contains_key(name) {
            props.insert(name.clone(), draw_other(&mut rng, name));
        }
    }
}

fn generate(
    n: usize,
    objectives: &[String],
    affinity: &str,
    streams: &RoundSeed,
    fp: FingerprintParams,
) -> Result<Library> {
    let mut rng = streams.stream(0);
    let w_internal: Vec<f64> = INTERNAL.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let w_terminal: Vec<f64> = TERMINAL_END.iter().map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut seen = HashSet::with_capacity(n);
    let mut mols: Vec<(String, f64)> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while mols.len() < n {
        attempts += 1;
        if attempts > 50 * n + 1000 {
            return Err(Error::input(format!("could not generate {n} distinct molecules")));
        }
        let mut smiles = String::new();
        let mut score = 0.0;
        if rng.random_bool(0.5) {
            let t = rng.random_range(0..TERMINAL_START.len());
            smiles.push_str(TERMINAL_START[t]);
            score += w_terminal[t];
        }
        for _ in 0..rng.random_range(3..=8) {
            let f = rng.random_range(0..INTERNAL.len());
            smiles.push_str(INTERNAL[f]);
            score += w_internal[f];
        }
        if rng.random_bool(0.5) {
            let t = rng.random_range(0..TERMINAL_END.len());
            smiles.push_str(TERMINAL_END[t]);
            score += w_terminal[t];
        }
        score += AFFINITY_NOISE * rng.sample::<f64, _>(rand_distr::StandardNormal);
        if seen.insert(smiles.clone()) {
            mols.push((smiles, score));
        }
    }
    let (lo, hi) = mols.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, s)| {
        (a.min(*s), b.max(*s))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    // Higher fragment score binds more strongly (more negative affinity).
    let ligands = mols
        .into_par_iter()
        .enumerate()
        .map(|(i, (smiles, score))| {
            let mut props = BTreeMap::new();
            let u = (score - lo) / span;
            props.insert(
                affinity.to_string(),
                AFFINITY_RANGE.1 - u * (AFFINITY_RANGE.1 - AFFINITY_RANGE.0),
            );
            other_props(objectives, affinity, streams, i, &mut props);
            Ligand::from_smiles(format!("SYN{i:06}"), smiles, props, fp)
        })
        .collect::<Result<Vec<_>>>()?;
    Library::new(ligands)
}

fn from_table(
    n: usize,
    objectives: &[String],
    affinity: &str,
    t: &TableSource,
    streams: &RoundSeed,
    fp: FingerprintParams,
) -> Result<Library> {
    let mut reader = open_table(&t.path)?;
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &t.id_column)?;
    let smiles_col = column(&headers, &t.smiles_column)?;
    let aff_col = column(&headers, &t.affinity_column)?;
    let extra: Vec<(String, usize)> = objectives
        .iter()
        .filter(|o| o.as_str() != affinity)
        .filter_map(|o| headers.iter().position(|h| h.trim() == o).map(|c| (o.clone(), c)))
        .collect();

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let Ok(a) = rec.get(aff_col).unwrap_or("").trim().parse::<f64>() else {
            continue;
        };
        if !a.is_finite() {
            continue;
        }
        let mut props = BTreeMap::new();
        props.insert(affinity.to_string(), a);
        let mut ok = true;
        for (name, c) in &extra {
            match rec.get(*c).unwrap_or("").trim().parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    props.insert(name.clone(), v);
                }
                _ => ok = false,
            }
        }
        if ok {
            rows.push((
                rec.get(id_col).unwrap_or("").trim().to_string(),
                rec.get(smiles_col).unwrap_or("").trim().to_string(),
                props,
            ));
        }
    }
    let parseable: Vec<bool> = rows
        .par_iter()
        .map(|(id, s, _)| !id.is_empty() && parse_smiles(s).is_ok())
        .collect();
    let rows: Vec<_> = rows
        .into_iter()
        .zip(parseable)
        .filter(|(_, ok)| *ok)
        .map(|(r, _)| r)
        .collect();
    if rows.len() < n {
        return Err(Error::input(format!(
            "table {} has {} usable rows, fewer than the {n} requested",
            t.path.display(),
            rows.len()
        )));
    }
    let mut idx = sample(&mut streams.stream(0), rows.len(), n).into_vec();
    idx.sort_unstable();
    let ligands = idx
        .into_par_iter()
        .enumerate()
        .map(|(i, r)| {
            let (id, smiles, mut props) = rows[r].clone();
            other_props(objectives, affinity, streams, i, &mut props);
            Ligand::from_smiles(id, smiles, props, fp)
        })
        .collect::<Result<Vec<_>>>()?;
    Library::new(ligands)
}
