//! Append-only JSON-lines record of accepted comparisons.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PreferenceDatum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    /// Monotone across the whole campaign, starting at 0.
    pub seq: u64,
    pub iteration: u32,
    pub pair_id: String,
    pub winner_id: String,
    pub loser_id: String,
    /// Raw (unnormalized) objective values in objective order.
    pub winner_props: Vec<f64>,
    pub loser_props: Vec<f64>,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
}

impl PreferenceRecord {
    pub fn datum(&self) -> PreferenceDatum<f64> {
        PreferenceDatum::new(self.winner_props.clone(), self.loser_props.clone())
    }
}

pub struct PreferenceLogWriter {
    path: PathBuf,
    file: File,
}

impl PreferenceLogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(PreferenceLogWriter { path, file })
    }

    /// Appends one record and syncs it to disk.
    pub fn append(&mut self, record: &PreferenceRecord) -> Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a log. A torn final line (no trailing newline, unparseable) is
/// dropped with a warning; damage anywhere else is an error. A missing file
/// reads as empty.
pub fn read_preference_log(path: impl AsRef<Path>) -> Result<Vec<PreferenceRecord>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = Vec::new();
    let mut reader = BufReader::new(file);
    loop {
        let mut buf = String::new();
        let n = reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        lines.push(buf);
    }
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PreferenceRecord>(line.trim_end()) {
            Ok(r) => out.push(r),
            Err(e) if i == last && !line.ends_with('\n') => {
                log::warn!("{}: dropping torn final record: {e}", path.display());
            }
            Err(e) => return Err(Error::Integrity(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}
