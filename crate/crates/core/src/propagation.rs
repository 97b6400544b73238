//! Greedy IoU chaining of proposals from keyframes across a video.
//!
//! Each propagated frame takes the proposal that best overlaps the previous
//! frame's mask. When nothing overlaps by at least the drift floor the
//! previous mask is carried over and the frame is flagged.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{iou, rle_decode, rle_encode, BinaryMask};
use crate::proposals::{FramePools, ProposalPool};

pub const DEFAULT_DRIFT_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub drift_floor: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            drift_floor: DEFAULT_DRIFT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// A mask fixed by a person or a simulated clicker.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeInit {
    pub frame: usize,
    pub mask: BinaryMask,
    /// Accepted proposal, when the mask came from a session.
    pub proposal: Option<u32>,
}

impl KeyframeInit {
    pub fn new(frame: usize, mask: BinaryMask) -> Self {
        KeyframeInit {
            frame,
            mask,
            proposal: None,
        }
    }

    pub fn with_proposal(mut self, id: u32) -> Self {
        self.proposal = Some(id);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub frame: usize,
    pub proposal: Option<u32>,
    pub mask: BinaryMask,
    /// Overlap between this mask and the one it was chained from.
    pub link_iou: Option<f64>,
    pub drifted: bool,
    pub keyframe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTrack {
    /// `frames[i].frame == i`.
    pub frames: Vec<TrackFrame>,
    pub keyframes: BTreeSet<usize>,
}

impl VideoTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mask(&self, frame: usize) -> Option<&BinaryMask> {
        self.frames.get(frame).map(|f| &f.mask)
    }

    pub fn drifted_frames(&self) -> Vec<usize> {
        self.frames.iter().filter(|f| f.drifted).map(|f| f.frame).collect()
    }
}

/// Index of the best proposal for `prev`: highest IoU, then objectness, then lowest id.
pub fn best_successor(pool: &ProposalPool, prev: &BinaryMask) -> Result<Option<(u32, f64)>> {
    let mut best: Option<(u32, f64, f64)> = None;
    for p in pool.proposals() {
        let v = iou(&p.mask, prev)?;
        let better = match best {
            None => true,
            Some((_, bv, bo)) => match v.total_cmp(&bv) {
                Ordering::Greater => true,
                Ordering::Equal => p.objectness > bo,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((p.id, v, p.objectness));
        }
    }
    Ok(best.map(|(id, v, _)| (id, v)))
}

/// Chain `steps` frames away from `init` in `direction`. The init frame is
/// not part of the output.
pub fn propagate_chain<P: FramePools + ?Sized>(
    pools: &P,
    init: &KeyframeInit,
    direction: Direction,
    steps: usize,
    config: &PropagationConfig,
) -> Result<Vec<TrackFrame>> {
    if direction == Direction::Backward && steps > init.frame {
        return Err(Error::invalid(format!(
            "cannot chain {steps} frames backward from frame {}",
            init.frame
        )));
    }
    let mut out = Vec::with_capacity(steps);
    let mut prev = init.mask.clone();
    for step in 1..=steps {
        let frame = match direction {
            Direction::Forward => init.frame + step,
            Direction::Backward => init.frame - step,
        };
        let pool = pools.pool(frame)?;
        if prev.dims() != pool.dims() {
            return Err(Error::DimensionMismatch {
                expected: pool.dims(),
                found: prev.dims(),
            });
        }
        let tf = match best_successor(&pool, &prev)? {
            Some((id, v)) if v >= config.drift_floor => {
                prev = pool.proposals()[id as usize].mask.clone();
                TrackFrame {
                    frame,
                    proposal: Some(id),
                    mask: prev.clone(),
                    link_iou: Some(v),
                    drifted: false,
                    keyframe: false,
                }
            }
            best => TrackFrame {
                frame,
                proposal: None,
                mask: prev.clone(),
                link_iou: best.map(|b| b.1),
                drifted: true,
                keyframe: false,
            },
        };
        out.push(tf);
    }
    Ok(out)
}

fn keyframe_entry(init: &KeyframeInit) -> TrackFrame {
    TrackFrame {
        frame: init.frame,
        proposal: init.proposal,
        mask: init.mask.clone(),
        link_iou: None,
        drifted: false,
        keyframe: true,
    }
}

fn sorted_inits(inits: &[KeyframeInit], frame_count: usize) -> Result<Vec<&KeyframeInit>> {
    if inits.is_empty() {
        return Err(Error::invalid("propagation needs at least one keyframe"));
    }
    let mut sorted: Vec<&KeyframeInit> = inits.iter().collect();
    sorted.sort_by_key(|i| i.frame);
    for w in sorted.windows(2) {
        if w[0].frame == w[1].frame {
            return Err(Error::invalid(format!("keyframe {} given twice", w[0].frame)));
        }
    }
    if let Some(last) = sorted.last() {
        if last.frame >= frame_count {
            return Err(Error::invalid(format!(
                "keyframe {} outside a {frame_count}-frame video",
                last.frame
            )));
        }
    }
    let dims = sorted[0].mask.dims();
    for i in &sorted {
        if i.mask.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: i.mask.dims(),
            });
        }
    }
    Ok(sorted)
}

/// Fill a `frame_count`-frame track from the keyframes. Each keyframe chains
/// forward up to the next one; frames before the first keyframe chain
/// backward from it.
pub fn propagate_keyframed<P: FramePools + ?Sized>(
    pools: &P,
    inits: &[KeyframeInit],
    frame_count: usize,
    config: &PropagationConfig,
) -> Result<VideoTrack> {
    let sorted = sorted_inits(inits, frame_count)?;
    let mut jobs: Vec<(&KeyframeInit, Direction, usize)> = Vec::with_capacity(sorted.len() + 1);
    jobs.push((sorted[0], Direction::Backward, sorted[0].frame));
    for (i, init) in sorted.iter().enumerate() {
        let end = sorted.get(i + 1).map_or(frame_count, |n| n.frame);
        jobs.push((init, Direction::Forward, end - init.frame - 1));
    }
    let segments: Vec<Vec<TrackFrame>> = jobs
        .par_iter()
        .map(|&(init, dir, steps)| propagate_chain(pools, init, dir, steps, config))
        .collect::<Result<_>>()?;

    let mut slots: Vec<Option<TrackFrame>> = vec![None; frame_count];
    for init in &sorted {
        slots[init.frame] = Some(keyframe_entry(init));
    }
    for tf in segments.into_iter().flatten() {
        let i = tf.frame;
        debug_assert!(slots[i].is_none(), "frame {i} filled twice");
        slots[i] = Some(tf);
    }
    Ok(VideoTrack {
        frames: slots.into_iter().map(|s| s.expect("every frame filled")).collect(),
        keyframes: sorted.iter().map(|i| i.frame).collect(),
    })
}

/// Add or replace a keyframe and refill only the frames it now governs: the
/// span up to the next keyframe, plus the leading frames when it becomes the
/// first keyframe. Returns the refilled frame numbers.
pub fn insert_keyframe<P: FramePools + ?Sized>(
    track: &mut VideoTrack,
    pools: &P,
    init: KeyframeInit,
    config: &PropagationConfig,
) -> Result<Vec<usize>> {
    let n = track.len();
    if init.frame >= n {
        return Err(Error::invalid(format!("keyframe {} outside a {n}-frame video", init.frame)));
    }
    if let Some(f) = track.frames.first() {
        init.mask.check_same_dims(&f.mask)?;
    }
    let next = track.keyframes.range(init.frame + 1..).next().copied().unwrap_or(n);
    let becomes_first = track.keyframes.range(..init.frame).next().is_none();
    let forward = propagate_chain(pools, &init, Direction::Forward, next - init.frame - 1, config)?;
    let backward = if becomes_first {
        propagate_chain(pools, &init, Direction::Backward, init.frame, config)?
    } else {
        Vec::new()
    };
    let mut touched = vec![init.frame];
    track.frames[init.frame] = keyframe_entry(&init);
    track.keyframes.insert(init.frame);
    for tf in forward.into_iter().chain(backward) {
        touched.push(tf.frame);
        let i = tf.frame;
        track.frames[i] = tf;
    }
    touched.sort_unstable();
    Ok(touched)
}

/// Frames `0, cadence, 2 * cadence, ...` below `frame_count`.
pub fn keyframe_schedule(frame_count: usize, cadence: usize) -> Result<Vec<usize>> {
    if cadence == 0 {
        return Err(Error::invalid("keyframe cadence must be at least 1"));
    }
    Ok((0..frame_count).step_by(cadence).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: usize,
    pub proposal: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link_iou: Option<f64>,
    pub drifted: bool,
    pub keyframe: bool,
    /// Base64 of the varint RLE bytes.
    pub rle: String,
}

/// On-disk form of a [`VideoTrack`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackManifest {
    #[serde(default)]
    pub video: Option<String>,
    #[serde(default)]
    pub object: Option<String>,
    pub width: usize,
    pub height: usize,
    pub keyframes: Vec<usize>,
    pub frames: Vec<TrackRecord>,
}

impl TrackManifest {
    pub fn from_track(track: &VideoTrack) -> Result<Self> {
        let first = track.frames.first().ok_or_else(|| Error::invalid("empty track"))?;
        Ok(TrackManifest {
            video: None,
            object: None,
            width: first.mask.width(),
            height: first.mask.height(),
            keyframes: track.keyframes.iter().copied().collect(),
            frames: track
                .frames
                .iter()
                .map(|f| TrackRecord {
                    frame: f.frame,
                    proposal: f.proposal,
                    link_iou: f.link_iou,
                    drifted: f.drifted,
                    keyframe: f.keyframe,
                    rle: B64.encode(rle_encode(&f.mask)),
                })
                .collect(),
        })
    }

    pub fn to_track(&self) -> Result<VideoTrack> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for (i, r) in self.frames.iter().enumerate() {
            if r.frame != i {
                return Err(Error::invalid(format!("track record {i} is for frame {}", r.frame)));
            }
            let bytes = B64
                .decode(&r.rle)
                .map_err(|e| Error::Rle(format!("frame {i}: bad base64: {e}")))?;
            frames.push(TrackFrame {
                frame: r.frame,
                proposal: r.proposal,
                mask: rle_decode(&bytes, self.width, self.height)?,
                link_iou: r.link_iou,
                drifted: r.drifted,
                keyframe: r.keyframe,
            });
        }
        Ok(VideoTrack {
            frames,
            keyframes: self.keyframes.iter().copied().collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests;
