//! JSON proposal manifests, one document per frame.
//!
//! ```json
//! {
//!   "frame": 0,
//!   "image": "../frames/00000.png",
//!   "width": 854,
//!   "height": 480,
//!   "proposals": [
//!     { "id": 0, "rle": "<base64 varint runs>", "objectness": 0.73, "source": "static" }
//!   ]
//! }
//! ```
//!
//! `image` is relative to the manifest's directory. `rle` is the
//! column-major varint run encoding from [`crate::mask::rle_encode`],
//! base64-encoded with the standard alphabet.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{ProposalInput, ProposalPool, Source};
use crate::error::{Error, Result};
use crate::mask::{rle_decode, rle_encode, BinaryMask, DEFAULT_DILATION_RADIUS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub width: usize,
    pub height: usize,
    pub proposals: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u64,
    pub rle: String,
    pub objectness: f64,
    pub source: Source,
}

impl ManifestEntry {
    pub fn new(id: u64, mask: &BinaryMask, objectness: f64, source: Source) -> Self {
        ManifestEntry {
            id,
            rle: B64.encode(rle_encode(mask)),
            objectness,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub dilation_radius: u32,
    /// Min-max rescale objectness when any raw score falls outside [0, 1]
    /// instead of rejecting the manifest.
    pub normalize_objectness: bool,
    /// Drop proposals whose mask is bit-identical to an earlier one.
    pub dedup: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            dilation_radius: DEFAULT_DILATION_RADIUS,
            normalize_objectness: false,
            dedup: false,
        }
    }
}

impl PoolManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            entry: "document".into(),
            reason: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_pool(pool: &ProposalPool, image: Option<String>) -> Self {
        PoolManifest {
            frame: pool.frame(),
            image,
            width: pool.width(),
            height: pool.height(),
            proposals: pool
                .proposals()
                .iter()
                .map(|p| ManifestEntry::new(p.manifest_id, &p.mask, p.objectness, p.source))
                .collect(),
        }
    }

    /// Decode and validate every entry, then build the pool. Static entries
    /// come first, then motion, then synthetic, each in manifest order.
    pub fn into_pool(self, path: &Path, opts: &IngestOptions) -> Result<ProposalPool> {
        let bad = |entry: String, reason: String| Error::Manifest {
            path: path.to_path_buf(),
            entry,
            reason,
        };
        if self.proposals.is_empty() {
            return Err(bad("proposals".into(), "no proposals".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(bad(
                "document".into(),
                format!("invalid dimensions {}x{}", self.width, self.height),
            ));
        }

        let mut seen = HashSet::new();
        let mut decoded = Vec::with_capacity(self.proposals.len());
        for (pos, e) in self.proposals.iter().enumerate() {
            let name = format!("proposal id {} (entry {pos})", e.id);
            if !seen.insert(e.id) {
                return Err(bad(name, "duplicate id".into()));
            }
            if !e.objectness.is_finite() {
                return Err(bad(name, format!("objectness {} is not finite", e.objectness)));
            }
            if !opts.normalize_objectness && !(0.0..=1.0).contains(&e.objectness) {
                return Err(bad(name, format!("objectness {} outside [0, 1]", e.objectness)));
            }
            let bytes = B64
                .decode(e.rle.as_bytes())
                .map_err(|err| bad(name.clone(), format!("invalid base64: {err}")))?;
            let mask = rle_decode(&bytes, self.width, self.height)
                .map_err(|err| bad(name.clone(), err.to_string()))?;
            if mask.is_empty() {
                return Err(bad(name, "empty mask".into()));
            }
            decoded.push((e.source, e.id, mask, e.objectness));
        }

        if opts.normalize_objectness {
            let lo = decoded.iter().map(|d| d.3).fold(f64::INFINITY, f64::min);
            let hi = decoded.iter().map(|d| d.3).fold(f64::NEG_INFINITY, f64::max);
            if lo < 0.0 || hi > 1.0 {
                for d in &mut decoded {
                    d.3 = if hi > lo { (d.3 - lo) / (hi - lo) } else { 0.5 };
                }
            }
        }

        // stable: manifest order is kept within each source
        decoded.sort_by_key(|d| d.0);

        if opts.dedup {
            let mut kept = HashSet::new();
            decoded.retain(|d| kept.insert(d.2.clone()));
        }

        let inputs = decoded
            .into_iter()
            .map(|(source, id, mask, objectness)| ProposalInput {
                mask,
                objectness,
                source,
                manifest_id: Some(id),
            })
            .collect();
        let pool = ProposalPool::build(self.frame, self.width, self.height, opts.dilation_radius, inputs)?;
        Ok(match &self.image {
            Some(img) => {
                let base = path.parent().unwrap_or(Path::new("."));
                pool.with_image(base.join(img))
            }
            None => pool,
        })
    }
}

/// Read, validate and index one frame's manifest.
pub fn ingest_pool(path: &Path, opts: &IngestOptions) -> Result<ProposalPool> {
    PoolManifest::read(path)?.into_pool(path, opts)
}
