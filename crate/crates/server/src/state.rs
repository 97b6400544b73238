use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use clickcarve_core::carving::{CarvingSession, DEFAULT_BUDGET, DEFAULT_TOP_K};
use clickcarve_core::catalog::{Catalog, DiskPools};
use clickcarve_core::propagation::VideoTrack;
use clickcarve_core::proposals::{FramePools, IngestOptions, ProposalPool};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub k: usize,
    pub budget: usize,
    pub ingest: IngestOptions,
    /// Keep a log of every mutating request for later replay.
    pub record_requests: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            k: DEFAULT_TOP_K,
            budget: DEFAULT_BUDGET,
            ingest: IngestOptions::default(),
            record_requests: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRequest {
    pub method: String,
    pub path: String,
    pub body: serde_json::Value,
}

pub struct SessionEntry {
    pub session: CarvingSession,
    pub video: String,
    pub frame: usize,
    pub object: Option<String>,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum TrackStatus {
    Running,
    Done(Arc<VideoTrack>),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct TrackJob {
    pub video: String,
    pub object: Option<String>,
    pub status: TrackStatus,
    pub track_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ImageKey {
    Overlay { video: String, frame: usize, proposal: u32, thumbnail: bool },
    TrackFrame { track: String, frame: usize },
}

const IMAGE_CACHE_LIMIT: usize = 4096;

pub struct AppState {
    pub catalog: Catalog,
    pub config: ServerConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    next_session: AtomicU64,
    pools: Mutex<HashMap<String, Arc<DiskPools>>>,
    images: Mutex<HashMap<ImageKey, Arc<Vec<u8>>>>,
    tracks: Mutex<HashMap<String, TrackJob>>,
    next_track: AtomicU64,
    log: Option<Mutex<Vec<LoggedRequest>>>,
}

impl AppState {
    pub fn new(catalog: Catalog, config: ServerConfig) -> Arc<Self> {
        let log = config.record_requests.then(|| Mutex::new(Vec::new()));
        Arc::new(AppState {
            catalog,
            config,
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            pools: Mutex::new(HashMap::new()),
            images: Mutex::new(HashMap::new()),
            tracks: Mutex::new(HashMap::new()),
            next_track: AtomicU64::new(1),
            log,
        })
    }

    pub fn video_pools(&self, video: &str) -> ApiResult<Arc<DiskPools>> {
        let mut pools = self.pools.lock().expect("pool map poisoned");
        if let Some(p) = pools.get(video) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.catalog.pools(video, self.config.ingest.clone())?);
        pools.insert(video.to_string(), p.clone());
        Ok(p)
    }

    /// Blocking: may decode a manifest.
    pub fn pool(&self, video: &str, frame: usize) -> ApiResult<Arc<ProposalPool>> {
        Ok(self.video_pools(video)?.pool(frame)?)
    }

    /// Allocate the next session id and register the session. The log entry,
    /// if any, is written under the same lock so ids replay in order.
    pub fn insert_session(&self, entry: SessionEntry, request: Option<LoggedRequest>) -> String {
        let _guard = self.log.as_ref().map(|l| l.lock().expect("log poisoned"));
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::SeqCst));
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(entry)));
        if let (Some(mut log), Some(req)) = (_guard, request) {
            log.push(req);
        }
        id
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Mutex<SessionEntry>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session {id:?}")))
    }

    pub fn recording(&self) -> bool {
        self.log.is_some()
    }

    pub fn record(&self, req: LoggedRequest) {
        if let Some(log) = &self.log {
            log.lock().expect("log poisoned").push(req);
        }
    }

    pub fn request_log(&self) -> Option<Vec<LoggedRequest>> {
        self.log.as_ref().map(|l| l.lock().expect("log poisoned").clone())
    }

    pub fn cached_image(&self, key: &ImageKey) -> Option<Arc<Vec<u8>>> {
        self.images.lock().expect("image cache poisoned").get(key).cloned()
    }

    pub fn cache_image(&self, key: ImageKey, bytes: Vec<u8>) -> Arc<Vec<u8>> {
        let mut images = self.images.lock().expect("image cache poisoned");
        if images.len() >= IMAGE_CACHE_LIMIT {
            images.clear();
        }
        images.entry(key).or_insert_with(|| Arc::new(bytes)).clone()
    }

    pub fn new_track(&self, video: &str, object: Option<String>) -> String {
        let id = format!("t{}", self.next_track.fetch_add(1, Ordering::SeqCst));
        self.tracks.lock().expect("track map poisoned").insert(
            id.clone(),
            TrackJob {
                video: video.to_string(),
                object,
                status: TrackStatus::Running,
                track_iou: None,
            },
        );
        id
    }

    pub fn finish_track(&self, id: &str, status: TrackStatus, track_iou: Option<f64>) {
        if let Some(job) = self.tracks.lock().expect("track map poisoned").get_mut(id) {
            job.status = status;
            job.track_iou = track_iou;
        }
    }

    pub fn track(&self, id: &str) -> ApiResult<TrackJob> {
        self.tracks
            .lock()
            .expect("track map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("track {id:?}")))
    }
}
