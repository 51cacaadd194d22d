//! Tabular outputs. The JSON rows served to clients and the CSV files are
//! produced from the same column lists.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::checkpoint::write_atomic;
use super::state::{MetricRecord, ScreenedEntry};
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SCREENED_FILE: &str = "screened.csv";
pub const PREFERENCES_FILE: &str = "preferences.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

pub fn metric_columns(ks: &[usize]) -> Vec<String> {
    let mut c: Vec<String> = ["iteration", "n_screened", "n_failed", "regret", "best_utility"]
        .into_iter()
        .map(String::from)
        .collect();
    c.extend(ks.iter().map(|k| format!("accuracy@{k}")));
    c
}

fn num(v: Option<f64>) -> Value {
    v.and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

pub fn metric_values(r: &MetricRecord) -> Vec<Value> {
    let mut v = vec![
        Value::from(r.iteration),
        Value::from(r.n_screened),
        Value::from(r.n_failed),
        num(r.regret),
        num(r.best_utility_found),
    ];
    v.extend(r.top_k_accuracy.iter().map(|a| num(*a)));
    v
}

pub fn screened_columns() -> Vec<String> {
    ["id", "iteration", "affinity"].into_iter().map(String::from).collect()
}

pub fn screened_values(e: &ScreenedEntry) -> Vec<Value> {
    vec![Value::from(e.id.clone()), Value::from(e.iteration), num(e.affinity)]
}

pub fn to_objects(columns: &[String], rows: impl IntoIterator<Item = Vec<Value>>) -> Vec<Map<String, Value>> {
    rows.into_iter()
        .map(|r| columns.iter().cloned().zip(r).collect())
        .collect()
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV text with a header row; null cells are left empty.
pub fn csv_bytes(columns: &[String], rows: impl IntoIterator<Item = Vec<Value>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r.iter().map(cell))?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_csv(path: &Path, columns: &[String], rows: impl IntoIterator<Item = Vec<Value>>) -> Result<()> {
    write_atomic(path, &csv_bytes(columns, rows)?)
}

/// Output locations of one campaign.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputPaths { dir: dir.into() }
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join(METRICS_FILE)
    }

    pub fn screened(&self) -> PathBuf {
        self.dir.join(SCREENED_FILE)
    }

    pub fn preferences(&self) -> PathBuf {
        self.dir.join(PREFERENCES_FILE)
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.dir.join(GROUND_TRUTH_FILE)
    }
}
