//! Campaign store. Each campaign sits behind one async mutex that
//! serializes its mutations; readers only touch a snapshot refreshed after
//! every mutation, so reads never wait on model fitting.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use prefscreen_core::screening::{
    Campaign, CampaignConfig, ExpertMode, PairCard, PropertyRange, Status, CHECKPOINT_FILE,
};
use prefscreen_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ApiError;

const CONFIG_FILE: &str = "config.json";
const META_FILE: &str = "meta.json";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// One subdirectory per campaign.
    pub data_dir: PathBuf,
    /// Depiction URL with `{smiles}` replaced by the URL-encoded SMILES.
    pub depiction_template: Option<String>,
    /// Suspend a campaign that has waited this long for a label.
    pub label_timeout: Option<Duration>,
    pub sweep_interval: Duration,
    /// Static assets served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            depiction_template: None,
            label_timeout: None,
            sweep_interval: Duration::from_secs(5),
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub campaign_id: String,
    pub status: Status,
    pub iteration: u32,
    pub pending_pairs: usize,
    pub completed_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub descriptor: SessionDescriptor,
    pub next_pair: Option<PairCard>,
    pub metrics: Vec<Map<String, Value>>,
    pub screened: Vec<Map<String, Value>>,
    pub ranges: Vec<PropertyRange>,
}

impl Snapshot {
    fn initializing(id: &str) -> Self {
        Snapshot {
            descriptor: SessionDescriptor {
                campaign_id: id.to_string(),
                status: Status::Initializing,
                iteration: 0,
                pending_pairs: 0,
                completed_pairs: 0,
                error: None,
            },
            next_pair: None,
            metrics: Vec::new(),
            screened: Vec::new(),
            ranges: Vec::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    idempotency_key: Option<String>,
}

pub(crate) struct Entry {
    pub id: String,
    pub campaign: tokio::sync::Mutex<Option<Campaign>>,
    snapshot: RwLock<Snapshot>,
    last_activity: Mutex<Instant>,
}

impl Entry {
    fn new(id: String) -> Self {
        Entry {
            snapshot: RwLock::new(Snapshot::initializing(&id)),
            id,
            campaign: tokio::sync::Mutex::new(None),
            last_activity: Mutex::new(Instant::now()),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn touch(&self) {
        *self.last_activity.lock().expect("activity lock") = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.last_activity.lock().expect("activity lock").elapsed()
    }

    fn set_status(&self, status: Status) {
        let mut s = self.snapshot.write().expect("snapshot lock");
        s.descriptor.status = status;
        s.next_pair = None;
    }

    fn set_error(&self, message: String) {
        self.snapshot.write().expect("snapshot lock").descriptor.error = Some(message);
    }

    /// Rebuilds the snapshot from the campaign.
    pub fn refresh(&self, campaign: &Campaign, depiction: Option<&str>) {
        let state = campaign.state();
        let next_pair = match campaign.next_pair() {
            Ok(Some(mut card)) => {
                if let Some(t) = depiction {
                    card.left.depiction_url = Some(depiction_url(t, &card.left.smiles));
                    card.right.depiction_url = Some(depiction_url(t, &card.right.smiles));
                }
                Some(card)
            }
            _ => None,
        };
        let mut s = self.snapshot.write().expect("snapshot lock");
        let error = s.descriptor.error.take();
        *s = Snapshot {
            descriptor: SessionDescriptor {
                campaign_id: self.id.clone(),
                status: campaign.status(),
                iteration: state.iteration,
                pending_pairs: state.pending_pairs(),
                completed_pairs: state.completed_pairs(),
                error,
            },
            next_pair,
            metrics: campaign.metric_rows(),
            screened: campaign.screened_rows(),
            ranges: campaign.property_ranges(),
        };
    }
}

pub fn depiction_url(template: &str, smiles: &str) -> String {
    let encoded: String = url::form_urlencoded::byte_serialize(smiles.as_bytes()).collect();
    template.replace("{smiles}", &encoded)
}

pub(crate) struct Inner {
    pub cfg: ServiceConfig,
    campaigns: RwLock<BTreeMap<String, Arc<Entry>>>,
    idempotency: Mutex<HashMap<String, String>>,
}

/// Shared service state.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.data_dir).map_err(|e| Error::io(&cfg.data_dir, e))?;
        Ok(AppState(Arc::new(Inner {
            cfg,
            campaigns: RwLock::new(BTreeMap::new()),
            idempotency: Mutex::new(HashMap::new()),
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.cfg
    }

    pub(crate) fn get(&self, id: &str) -> std::result::Result<Arc<Entry>, ApiError> {
        self.0
            .campaigns
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown campaign `{id}`")))
    }

    pub fn list(&self) -> Vec<SessionDescriptor> {
        self.0
            .campaigns
            .read()
            .expect("registry lock")
            .values()
            .map(|e| e.snapshot().descriptor)
            .collect()
    }

    fn campaign_dir(&self, id: &str) -> PathBuf {
        self.0.cfg.data_dir.join(id)
    }

    /// Registers a campaign and starts its initialization in the
    /// background. A repeated idempotency key returns the earlier id.
    pub fn create(&self, body: &str, idempotency_key: Option<String>) -> std::result::Result<String, ApiError> {
        let mut config = CampaignConfig::from_json(body)?;
        if config.expert_mode != ExpertMode::Live {
            return Err(ApiError::invalid("expert_mode", "the service runs live campaigns only"));
        }
        let mut keys = self.0.idempotency.lock().expect("idempotency lock");
        if let Some(id) = idempotency_key.as_ref().and_then(|k| keys.get(k)) {
            return Ok(id.clone());
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.campaign_dir(&id);
        config.output_dir = Some(dir.clone());
        config.resume = Some(dir.join(CHECKPOINT_FILE));
        let persisted = (|| -> Result<()> {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let meta = serde_json::to_string(&Meta {
                idempotency_key: idempotency_key.clone(),
            })?;
            fs::write(dir.join(META_FILE), meta).map_err(|e| Error::io(&dir, e))?;
            // The config is written last: its presence marks a campaign for
            // recovery.
            prefscreen_core::screening::write_atomic(&dir.join(CONFIG_FILE), config.to_json()?.as_bytes())
        })();
        persisted?;
        if let Some(k) = idempotency_key {
            keys.insert(k, id.clone());
        }
        drop(keys);
        self.start(id.clone(), config);
        Ok(id)
    }

    fn start(&self, id: String, config: CampaignConfig) {
        let entry = Arc::new(Entry::new(id.clone()));
        self.0
            .campaigns
            .write()
            .expect("registry lock")
            .insert(id, entry.clone());
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut guard = entry.campaign.blocking_lock();
            match Campaign::open(config) {
                Ok(c) => {
                    entry.refresh(&c, state.depiction());
                    *guard = Some(c);
                    state.advance_locked(&entry, guard.as_mut().expect("just set"));
                }
                Err(e) => {
                    log::error!("campaign {} failed to start: {e}", entry.id);
                    entry.set_error(e.to_string());
                }
            }
        });
    }

    /// Reloads every campaign found in the data directory.
    pub fn recover(&self) -> Result<usize> {
        let dir = &self.0.cfg.data_dir;
        let mut found = 0;
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(CONFIG_FILE).is_file())
            .collect();
        entries.sort();
        for path in entries {
            let Some(id) = path.file_name().and_then(|n| n.to_str()).map(String::from) else {
                continue;
            };
            let config = CampaignConfig::from_path(path.join(CONFIG_FILE))?;
            if let Ok(text) = fs::read_to_string(path.join(META_FILE)) {
                if let Ok(Meta {
                    idempotency_key: Some(k),
                }) = serde_json::from_str(&text)
                {
                    self.0
                        .idempotency
                        .lock()
                        .expect("idempotency lock")
                        .insert(k, id.clone());
                }
            }
            log::info!("recovering campaign {id}");
            self.start(id, config);
            found += 1;
        }
        Ok(found)
    }

    fn depiction(&self) -> Option<&str> {
        self.0.cfg.depiction_template.as_deref()
    }

    /// Moves the campaign forward until it needs labels, is suspended or is
    /// done. Runs on a blocking thread with the campaign lock held.
    pub(crate) fn advance_locked(&self, entry: &Entry, campaign: &mut Campaign) {
        loop {
            if campaign.is_done() || campaign.state().suspended {
                break;
            }
            let step = match campaign.state().status {
                Status::Initializing | Status::Measuring => campaign.begin_iteration(),
                Status::AwaitingLabels if campaign.state().pending_pairs() == 0 => {
                    entry.set_status(Status::Acquiring);
                    campaign.acquire()
                }
                _ => break,
            };
            if let Err(e) = step {
                log::error!("campaign {} stalled: {e}", entry.id);
                entry.set_error(e.to_string());
                entry.refresh(campaign, self.depiction());
                return;
            }
            entry.refresh(campaign, self.depiction());
        }
        entry.touch();
        entry.refresh(campaign, self.depiction());
    }

    /// Spawns [`Self::advance_locked`] in the background.
    pub(crate) fn advance(&self, entry: Arc<Entry>) {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut guard = entry.campaign.blocking_lock();
            if let Some(c) = guard.as_mut() {
                state.advance_locked(&entry, c);
            }
        });
    }

    /// Suspends campaigns that have waited longer than the label timeout.
    pub async fn sweep(&self) {
        let Some(timeout) = self.0.cfg.label_timeout else {
            return;
        };
        let entries: Vec<Arc<Entry>> = self
            .0
            .campaigns
            .read()
            .expect("registry lock")
            .values()
            .cloned()
            .collect();
        for e in entries {
            if e.snapshot().descriptor.status != Status::AwaitingLabels || e.idle_for() < timeout {
                continue;
            }
            let Ok(mut guard) = e.campaign.try_lock() else { continue };
            if let Some(c) = guard.as_mut() {
                match c.suspend() {
                    Ok(()) => log::warn!("campaign {} suspended after {:?} without labels", e.id, timeout),
                    Err(err) => log::error!("campaign {}: {err}", e.id),
                }
                e.refresh(c, self.depiction());
            }
        }
    }

    pub(crate) fn depiction_template(&self) -> Option<&str> {
        self.depiction()
    }

    pub fn data_dir(&self) -> &Path {
        &self.0.cfg.data_dir
    }
}
