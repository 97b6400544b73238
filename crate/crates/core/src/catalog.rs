//! On-disk dataset layout.
//!
//! ```text
//! data_root/{video}/frames/{frame:05}.png
//! data_root/{video}/proposals/{frame:05}.json
//! data_root/{video}/gt/{object}/{frame:05}.png
//! ```
//!
//! Frame images are optional. Ground truth may be sparse.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::overlay::read_mask_png;
use crate::proposals::{ingest_pool, FramePools, IngestOptions, ProposalPool};

pub fn frame_file(frame: usize, ext: &str) -> String {
    format!("{frame:05}.{ext}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoEntry {
    pub name: String,
    /// Frames with a proposal manifest.
    pub pool_frames: BTreeSet<usize>,
    pub image_frames: BTreeSet<usize>,
    /// Object label to annotated frames.
    pub objects: BTreeMap<String, BTreeSet<usize>>,
}

impl VideoEntry {
    /// One past the last frame with a pool.
    pub fn frame_count(&self) -> usize {
        self.pool_frames.last().map_or(0, |f| f + 1)
    }

    pub fn missing_pools(&self) -> Vec<usize> {
        (0..self.frame_count()).filter(|f| !self.pool_frames.contains(f)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub root: PathBuf,
    pub videos: BTreeMap<String, VideoEntry>,
}

fn numbered_files(dir: &Path, ext: &str) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            out.insert(n);
        }
    }
    Ok(out)
}

fn subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                out.push(name.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

impl Catalog {
    /// Index a data root without decoding anything.
    pub fn scan(root: &Path) -> Result<Catalog> {
        if !root.is_dir() {
            return Err(Error::NotFound(format!("data root {} is not a directory", root.display())));
        }
        let mut videos = BTreeMap::new();
        for name in subdirs(root)? {
            let vdir = root.join(&name);
            let mut objects = BTreeMap::new();
            for obj in subdirs(&vdir.join("gt"))? {
                objects.insert(obj.clone(), numbered_files(&vdir.join("gt").join(&obj), "png")?);
            }
            let entry = VideoEntry {
                name: name.clone(),
                pool_frames: numbered_files(&vdir.join("proposals"), "json")?,
                image_frames: numbered_files(&vdir.join("frames"), "png")?,
                objects,
            };
            if entry.pool_frames.is_empty() && entry.objects.is_empty() && entry.image_frames.is_empty() {
                continue;
            }
            videos.insert(name, entry);
        }
        Ok(Catalog {
            root: root.to_path_buf(),
            videos,
        })
    }

    pub fn video(&self, name: &str) -> Result<&VideoEntry> {
        self.videos
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("video {name:?}")))
    }

    pub fn video_dir(&self, video: &str) -> PathBuf {
        self.root.join(video)
    }

    pub fn frame_path(&self, video: &str, frame: usize) -> PathBuf {
        self.video_dir(video).join("frames").join(frame_file(frame, "png"))
    }

    pub fn pool_path(&self, video: &str, frame: usize) -> PathBuf {
        self.video_dir(video).join("proposals").join(frame_file(frame, "json"))
    }

    pub fn gt_path(&self, video: &str, object: &str, frame: usize) -> PathBuf {
        self.video_dir(video).join("gt").join(object).join(frame_file(frame, "png"))
    }

    pub fn load_pool(&self, video: &str, frame: usize, opts: &IngestOptions) -> Result<ProposalPool> {
        let v = self.video(video)?;
        if !v.pool_frames.contains(&frame) {
            return Err(Error::MissingPool(frame));
        }
        ingest_pool(&self.pool_path(video, frame), opts)
    }

    pub fn load_gt(&self, video: &str, object: &str, frame: usize) -> Result<BinaryMask> {
        let v = self.video(video)?;
        let frames = v
            .objects
            .get(object)
            .ok_or_else(|| Error::NotFound(format!("object {object:?} in video {video:?}")))?;
        if !frames.contains(&frame) {
            return Err(Error::NotFound(format!(
                "ground truth for {video}/{object} frame {frame}"
            )));
        }
        read_mask_png(&self.gt_path(video, object, frame))
    }

    /// All annotated frames of one object.
    pub fn load_gt_track(&self, video: &str, object: &str) -> Result<BTreeMap<usize, BinaryMask>> {
        let frames = self
            .video(video)?
            .objects
            .get(object)
            .ok_or_else(|| Error::NotFound(format!("object {object:?} in video {video:?}")))?
            .clone();
        frames
            .into_iter()
            .map(|f| Ok((f, self.load_gt(video, object, f)?)))
            .collect()
    }

    /// Decode every pool and ground-truth mask and check that sizes agree
    /// within each video.
    pub fn validate(&self, opts: &IngestOptions) -> Result<CatalogReport> {
        let mut report = CatalogReport::default();
        for (name, v) in &self.videos {
            let mut dims: Option<(usize, usize)> = None;
            let mut check = |found: (usize, usize), what: String| -> Result<()> {
                match dims {
                    None => {
                        dims = Some(found);
                        Ok(())
                    }
                    Some(expected) if expected != found => Err(Error::invalid(format!(
                        "{what}: size {}x{} differs from {}x{} elsewhere in video {name:?}",
                        found.0, found.1, expected.0, expected.1
                    ))),
                    Some(_) => Ok(()),
                }
            };
            let mut proposals = 0;
            for &f in &v.pool_frames {
                let pool = self.load_pool(name, f, opts)?;
                if pool.frame() != f {
                    return Err(Error::invalid(format!(
                        "{} declares frame {} but is named for frame {f}",
                        self.pool_path(name, f).display(),
                        pool.frame()
                    )));
                }
                check(pool.dims(), self.pool_path(name, f).display().to_string())?;
                proposals += pool.len();
            }
            let mut gt_frames = 0;
            for (obj, frames) in &v.objects {
                for &f in frames {
                    let m = self.load_gt(name, obj, f)?;
                    check(m.dims(), self.gt_path(name, obj, f).display().to_string())?;
                    gt_frames += 1;
                }
            }
            report.videos.push(VideoReport {
                name: name.clone(),
                frames: v.frame_count(),
                pools: v.pool_frames.len(),
                missing_pools: v.missing_pools(),
                proposals,
                objects: v.objects.len(),
                gt_frames,
                width: dims.map(|d| d.0),
                height: dims.map(|d| d.1),
            });
        }
        Ok(report)
    }

    pub fn pools(&self, video: &str, opts: IngestOptions) -> Result<DiskPools> {
        self.video(video)?;
        Ok(DiskPools {
            catalog: self.clone(),
            video: video.to_string(),
            opts,
            cache: Mutex::new(HashMap::new()),
        })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CatalogReport {
    pub videos: Vec<VideoReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoReport {
    pub name: String,
    pub frames: usize,
    pub pools: usize,
    pub missing_pools: Vec<usize>,
    pub proposals: usize,
    pub objects: usize,
    pub gt_frames: usize,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

/// Lazily loaded, cached pools of one video.
#[derive(Debug)]
pub struct DiskPools {
    catalog: Catalog,
    video: String,
    opts: IngestOptions,
    cache: Mutex<HashMap<usize, Arc<ProposalPool>>>,
}

impl DiskPools {
    pub fn video(&self) -> &str {
        &self.video
    }
}

impl FramePools for DiskPools {
    fn pool(&self, frame: usize) -> Result<Arc<ProposalPool>> {
        if let Some(p) = self.cache.lock().expect("pool cache poisoned").get(&frame) {
            return Ok(p.clone());
        }
        // decode outside the lock; a racing loader just wastes work
        let mut pool = self.catalog.load_pool(&self.video, frame, &self.opts)?;
        let img = self.catalog.frame_path(&self.video, frame);
        if img.is_file() {
            pool = pool.with_image(img);
        }
        let pool = Arc::new(pool);
        let mut cache = self.cache.lock().expect("pool cache poisoned");
        Ok(cache.entry(frame).or_insert(pool).clone())
    }
}
