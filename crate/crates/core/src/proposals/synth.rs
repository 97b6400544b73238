//! Synthetic proposal pools around a ground-truth mask, for tests and
//! simulation at desk scale.
//!
//! Three kinds of proposal are drawn:
//! * near-duplicates: the ground truth dilated or eroded by up to
//!   `perturb_radius` pixels;
//! * partials: the ground truth with one or two elliptical bites taken out
//!   of its outline;
//! * distractors: random blobs, resampled until their overlap with the
//!   ground truth is below `max_distractor_iou`. A `fragment_fraction` of
//!   them are centred inside the object, like the sub-part segments real
//!   proposal generators emit, so their outlines cut through its interior.
//!   The rest land anywhere in the frame.
//!
//! Objectness is drawn per kind from overlapping ranges so that it carries
//! some signal but never orders proposals by quality.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ProposalInput, ProposalPool, Source};
use crate::error::{Error, Result};
use crate::mask::{boundary_pixels, dilate, erode, iou, largest_component, BinaryMask, Pixel};
use crate::shapes::ellipse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub near: usize,
    pub partial: usize,
    pub distractor: usize,
    pub perturb_radius: u32,
    pub dilation_radius: u32,
    pub max_distractor_iou: f64,
    pub fragment_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            near: 5,
            partial: 5,
            distractor: 90,
            perturb_radius: 2,
            dilation_radius: crate::mask::DEFAULT_DILATION_RADIUS,
            max_distractor_iou: 0.4,
            fragment_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Near,
    Partial,
    Distractor,
}

#[derive(Debug, Clone)]
pub struct SyntheticProposal {
    pub input: ProposalInput,
    pub kind: SynthKind,
    pub iou_to_gt: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticPool {
    pub pool: ProposalPool,
    /// Indexed by proposal id.
    pub iou_to_gt: Vec<f64>,
    pub kinds: Vec<SynthKind>,
}

/// Draw proposals for one object. Frames with several objects concatenate
/// the outputs before building a pool.
pub fn synthesize_proposals<R: Rng + ?Sized>(
    gt: &BinaryMask,
    config: &SynthConfig,
    rng: &mut R,
) -> Result<Vec<SyntheticProposal>> {
    if gt.is_empty() {
        return Err(Error::EmptyMask);
    }
    if config.near + config.partial + config.distractor == 0 {
        return Err(Error::invalid("synthetic pool config has all counts zero"));
    }
    if !(0.0..=1.0).contains(&config.fragment_fraction) {
        return Err(Error::invalid("fragment_fraction must lie in [0, 1]"));
    }
    let mut out = Vec::with_capacity(config.near + config.partial + config.distractor);
    let mut push = |mask: BinaryMask, objectness: f64, kind: SynthKind| -> Result<()> {
        let iou_to_gt = iou(&mask, gt)?;
        out.push(SyntheticProposal {
            input: ProposalInput::new(mask, objectness, Source::Synthetic),
            kind,
            iou_to_gt,
        });
        Ok(())
    };

    for _ in 0..config.near {
        let mask = near_duplicate(gt, config.perturb_radius, rng);
        push(mask, rng.random_range(0.3..0.9), SynthKind::Near)?;
    }

    let outline: Vec<Pixel> = boundary_pixels(gt).iter_ones().collect();
    let equiv_radius = (gt.count_ones() as f64 / PI).sqrt();
    for _ in 0..config.partial {
        let mask = partial(gt, &outline, equiv_radius, rng);
        push(mask, rng.random_range(0.4..1.0), SynthKind::Partial)?;
    }

    let foreground: Vec<Pixel> = gt.iter_ones().collect();
    for _ in 0..config.distractor {
        let anchor = rng
            .random_bool(config.fragment_fraction)
            .then(|| (*foreground.choose(rng).expect("nonempty gt"), equiv_radius));
        let mask = distractor(gt, anchor, config.max_distractor_iou, rng)?;
        push(mask, rng.random_range(0.0..1.0), SynthKind::Distractor)?;
    }
    Ok(out)
}

/// Deterministic pool for `(gt, config, seed)`.
pub fn synthesize_pool(
    frame: usize,
    gt: &BinaryMask,
    config: &SynthConfig,
    seed: u64,
) -> Result<SyntheticPool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let props = synthesize_proposals(gt, config, &mut rng)?;
    let iou_to_gt = props.iter().map(|p| p.iou_to_gt).collect();
    let kinds = props.iter().map(|p| p.kind).collect();
    let inputs = props.into_iter().map(|p| p.input).collect();
    let pool = ProposalPool::build(frame, gt.width(), gt.height(), config.dilation_radius, inputs)?;
    Ok(SyntheticPool {
        pool,
        iou_to_gt,
        kinds,
    })
}

fn near_duplicate<R: Rng + ?Sized>(gt: &BinaryMask, max_radius: u32, rng: &mut R) -> BinaryMask {
    let r = rng.random_range(0..=max_radius);
    if r == 0 {
        return gt.clone();
    }
    if rng.random_bool(0.5) {
        let e = erode(gt, r);
        if !e.is_empty() {
            return e;
        }
    }
    dilate(gt, r)
}

fn partial<R: Rng + ?Sized>(
    gt: &BinaryMask,
    outline: &[Pixel],
    equiv_radius: f64,
    rng: &mut R,
) -> BinaryMask {
    let (w, h) = gt.dims();
    let mut fallback = None;
    for _ in 0..20 {
        let bites = rng.random_range(1..=2);
        let mut carved = gt.clone();
        for _ in 0..bites {
            let c = outline.choose(rng).expect("nonempty outline");
            let a = rng.random_range(0.35..0.75) * equiv_radius;
            let b = rng.random_range(0.35..0.75) * equiv_radius;
            let bite = ellipse(w, h, (c.x as f64, c.y as f64), a, b, rng.random_range(0.0..PI));
            carved = carved.difference(&bite).expect("same dims");
        }
        let Some(carved) = largest_component(&carved) else {
            continue;
        };
        let overlap = iou(&carved, gt).expect("same dims");
        if (0.45..=0.92).contains(&overlap) {
            return carved;
        }
        fallback.get_or_insert(carved);
    }
    fallback.unwrap_or_else(|| gt.clone())
}

fn random_blob<R: Rng + ?Sized>(w: usize, h: usize, rng: &mut R) -> BinaryMask {
    let short = w.min(h) as f64;
    let center = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
    let a = rng.random_range(0.04..0.35) * short;
    let b = rng.random_range(0.04..0.35) * short;
    let mut blob = ellipse(w, h, center, a, b, rng.random_range(0.0..PI));
    if rng.random_bool(0.3) {
        let off = (
            center.0 + rng.random_range(-1.0..1.0) * a,
            center.1 + rng.random_range(-1.0..1.0) * b,
        );
        let extra = ellipse(w, h, off, 0.6 * a.max(b), 0.4 * a.min(b), rng.random_range(0.0..PI));
        blob = blob.union(&extra).expect("same dims");
    }
    blob
}

fn fragment<R: Rng + ?Sized>(w: usize, h: usize, at: Pixel, equiv_radius: f64, rng: &mut R) -> BinaryMask {
    let a = rng.random_range(0.2..0.7) * equiv_radius;
    let b = rng.random_range(0.2..0.7) * equiv_radius;
    ellipse(w, h, (at.x as f64, at.y as f64), a, b, rng.random_range(0.0..PI))
}

/// `anchor` = (object pixel, equivalent radius) asks for a fragment there.
fn distractor<R: Rng + ?Sized>(
    gt: &BinaryMask,
    anchor: Option<(Pixel, f64)>,
    max_iou: f64,
    rng: &mut R,
) -> Result<BinaryMask> {
    let (w, h) = gt.dims();
    for _ in 0..200 {
        let blob = match anchor {
            Some((at, r)) => fragment(w, h, at, r, rng),
            None => random_blob(w, h, rng),
        };
        if !blob.is_empty() && iou(&blob, gt)? < max_iou {
            return Ok(blob);
        }
    }
    // the frame is nearly all object; any single off-object pixel will do
    let outside = gt.complement();
    let pixels: Vec<Pixel> = outside.iter_ones().collect();
    let p = pixels
        .choose(rng)
        .ok_or_else(|| Error::invalid("ground truth covers the whole frame"))?;
    let mut m = BinaryMask::new(w, h)?;
    m.set(p.x as usize, p.y as usize, true);
    Ok(m)
}
