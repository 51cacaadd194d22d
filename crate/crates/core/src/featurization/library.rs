//! Ligand library ingestion from delimited text tables.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fingerprint::Fingerprint;
use super::morgan::{morgan_fingerprint, FingerprintParams};
use super::smiles::parse_smiles;
use crate::error::{Error, Result};

/// One library member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ligand {
    pub id: String,
    pub smiles: String,
    pub fingerprint: Fingerprint,
    pub properties: BTreeMap<String, f64>,
}

impl Ligand {
    pub fn from_smiles(
        id: impl Into<String>,
        smiles: impl Into<String>,
        properties: BTreeMap<String, f64>,
        fp: FingerprintParams,
    ) -> Result<Self> {
        let smiles = smiles.into();
        let graph = parse_smiles(&smiles)?;
        Ok(Ligand {
            id: id.into(),
            fingerprint: morgan_fingerprint(&graph, fp.radius, fp.n_bits)?,
            smiles,
            properties,
        })
    }
}

/// Ordered collection of ligands with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Library {
    ligands: Vec<Ligand>,
    index: HashMap<String, usize>,
}

impl Library {
    pub fn new(ligands: Vec<Ligand>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ligands.len());
        for (i, l) in ligands.iter().enumerate() {
            if index.insert(l.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(l.id.clone()));
            }
        }
        Ok(Library { ligands, index })
    }

    pub fn len(&self) -> usize {
        self.ligands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ligands.is_empty()
    }

    pub fn ligands(&self) -> &[Ligand] {
        &self.ligands
    }

    pub fn get(&self, i: usize) -> &Ligand {
        &self.ligands[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// SHA-256 over the ordered ids; identifies a library in checkpoints.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.ligands {
            h.update(l.id.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Per-property `(min, max)` over the library.
    pub fn property_ranges(&self, names: &[String]) -> Vec<(f64, f64)> {
        names
            .iter()
            .map(|n| {
                self.ligands
                    .iter()
                    .filter_map(|l| l.properties.get(n).copied())
                    .filter(|v| v.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .collect()
    }
}

/// Column layout of a library table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySchema {
    pub id_column: String,
    pub smiles_column: String,
    /// Numeric columns that every accepted row must carry.
    pub properties: Vec<String>,
}

impl LibrarySchema {
    pub fn new(properties: impl IntoIterator<Item = impl Into<String>>) -> Self {
        LibrarySchema {
            id_column: "id".into(),
            smiles_column: "smiles".into(),
            properties: properties.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct LibraryLoad {
    pub library: Library,
    pub skipped: Vec<SkippedRow>,
}

pub(crate) fn open_table(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    let gz = name.ends_with(".gz");
    let stem = name.trim_end_matches(".gz");
    let reader: Box<dyn Read> = if gz {
        Box::new(flate2::read::GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let delimiter = if stem.ends_with(".tsv") { b'\t' } else { b',' };
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader))
}

pub(crate) fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema {
            missing: name.to_string(),
            available: headers.iter().map(str::to_string).collect(),
        })
}

/// Reads `id`, `smiles` and the declared numeric columns, fingerprinting
/// every row. Rows that fail to parse or lack a finite declared value are
/// skipped and reported; the result keeps file order.
pub fn load_library_csv(path: impl AsRef<Path>, schema: &LibrarySchema, fp: FingerprintParams) -> Result<LibraryLoad> {
    let path = path.as_ref();
    let mut reader = open_table(path)?;
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &schema.id_column)?;
    let smiles_col = column(&headers, &schema.smiles_column)?;
    let prop_cols = schema
        .properties
        .iter()
        .map(|p| column(&headers, p))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        rows.push((i + 2, rec?));
    }

    let parsed: Vec<std::result::Result<Ligand, SkippedRow>> = rows
        .par_iter()
        .map(|(line, rec)| {
            let skip = |reason: String| SkippedRow { line: *line, reason };
            let id = rec.get(id_col).unwrap_or("").trim();
            if id.is_empty() {
                return Err(skip("empty id".into()));
            }
            let smiles = rec.get(smiles_col).unwrap_or("").trim();
            let mut properties = BTreeMap::new();
            for (name, &c) in schema.properties.iter().zip(&prop_cols) {
                let raw = rec.get(c).unwrap_or("").trim();
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        properties.insert(name.clone(), v);
                    }
                    _ => return Err(skip(format!("property `{name}` missing or not finite: `{raw}`"))),
                }
            }
            Ligand::from_smiles(id, smiles, properties, fp).map_err(|e| skip(e.to_string()))
        })
        .collect();

    let mut ligands = Vec::with_capacity(parsed.len());
    let mut skipped = Vec::new();
    for r in parsed {
        match r {
            Ok(l) => ligands.push(l),
            Err(s) => {
                log::warn!("{}: skipping line {}: {}", path.display(), s.line, s.reason);
                skipped.push(s);
            }
        }
    }
    Ok(LibraryLoad {
        library: Library::new(ligands)?,
        skipped,
    })
}
