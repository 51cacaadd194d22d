//! Versioned, hashed checkpoint files.
//!
//! Layout: `{"format_version":1,"sha256":"<hex>","state":<payload>}` where
//! the digest covers the payload bytes exactly as written.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::config::CampaignConfig;
use super::state::CampaignState;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: CampaignConfig,
    pub state: CampaignState,
}

#[derive(Deserialize)]
struct Envelope<'a> {
    format_version: u32,
    sha256: String,
    #[serde(borrow)]
    state: &'a RawValue,
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to a sibling temporary file, syncs it and renames it over `path`,
/// so a crash leaves either the old or the new checkpoint.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Result<String> {
    let payload = serde_json::to_string(checkpoint)?;
    Ok(format!(
        "{{\"format_version\":{FORMAT_VERSION},\"sha256\":\"{}\",\"state\":{payload}}}",
        digest(payload.as_bytes())
    ))
}

pub fn decode_checkpoint(text: &str) -> Result<Checkpoint> {
    let envelope: Envelope<'_> = match serde_json::from_str(text) {
        Ok(e) => e,
        Err(e) => {
            // A well-formed document from another version should report the
            // version rather than a parse failure.
            if let Ok(v) = serde_json::from_str::<VersionOnly>(text) {
                if v.format_version != FORMAT_VERSION {
                    return Err(Error::Migration {
                        found: v.format_version,
                        expected: FORMAT_VERSION,
                    });
                }
            }
            return Err(Error::Integrity(format!("unreadable envelope: {e}")));
        }
    };
    if envelope.format_version != FORMAT_VERSION {
        return Err(Error::Migration {
            found: envelope.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let payload = envelope.state.get();
    if digest(payload.as_bytes()) != envelope.sha256 {
        return Err(Error::Integrity("digest mismatch".into()));
    }
    serde_json::from_str(payload).map_err(|e| Error::Integrity(format!("unreadable state: {e}")))
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path.as_ref(), encode_checkpoint(checkpoint)?.as_bytes())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text)
}
