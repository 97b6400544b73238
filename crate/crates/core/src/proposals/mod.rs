//! Per-frame proposal pools and the pixel -> proposal lookup used for voting.

mod index;
mod manifest;
mod synth;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{iou, BinaryMask, ContourMask};

pub use index::InvertedIndex;
pub use manifest::{ingest_pool, IngestOptions, ManifestEntry, PoolManifest};
pub use synth::{
    synthesize_pool, synthesize_proposals, SynthConfig, SynthKind, SyntheticPool,
    SyntheticProposal,
};

/// Where a proposal came from. Static and motion proposals share one
/// objectness scale once merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Static,
    Motion,
    Synthetic,
}

/// A candidate region: its mask, the dilated boundary band that collects
/// votes, and an objectness prior used to break vote ties.
///
/// Vote counts are per-session state and live in
/// [`CarvingSession`](crate::carving::CarvingSession), so one immutable pool
/// can back many sessions.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub id: u32,
    pub mask: BinaryMask,
    pub contour: ContourMask,
    pub objectness: f64,
    pub source: Source,
    /// Identifier carried over from the manifest entry (equals `id` for
    /// pools built in memory).
    pub manifest_id: u64,
}

/// Input to [`ProposalPool::build`].
#[derive(Debug, Clone)]
pub struct ProposalInput {
    pub mask: BinaryMask,
    pub objectness: f64,
    pub source: Source,
    pub manifest_id: Option<u64>,
}

impl ProposalInput {
    pub fn new(mask: BinaryMask, objectness: f64, source: Source) -> Self {
        ProposalInput {
            mask,
            objectness,
            source,
            manifest_id: None,
        }
    }
}

/// All proposals for one frame plus their inverted index. Immutable once built.
#[derive(Debug, Clone)]
pub struct ProposalPool {
    frame: usize,
    width: usize,
    height: usize,
    dilation_radius: u32,
    proposals: Vec<Proposal>,
    index: InvertedIndex,
    image: Option<PathBuf>,
}

impl ProposalPool {
    /// Validate inputs, compute contour bands and build the index. Ids are
    /// assigned `0..m` in input order.
    pub fn build(
        frame: usize,
        width: usize,
        height: usize,
        dilation_radius: u32,
        inputs: Vec<ProposalInput>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("a proposal pool needs at least one proposal"));
        }
        for (i, p) in inputs.iter().enumerate() {
            if p.mask.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    found: p.mask.dims(),
                });
            }
            if !(p.objectness.is_finite() && (0.0..=1.0).contains(&p.objectness)) {
                return Err(Error::invalid(format!(
                    "proposal {i}: objectness {} outside [0, 1]",
                    p.objectness
                )));
            }
            if p.mask.is_empty() {
                return Err(Error::invalid(format!("proposal {i}: empty mask")));
            }
        }
        let proposals: Vec<Proposal> = inputs
            .into_par_iter()
            .enumerate()
            .map(|(i, p)| Proposal {
                id: i as u32,
                contour: ContourMask::from_region(&p.mask, dilation_radius),
                mask: p.mask,
                objectness: p.objectness,
                source: p.source,
                manifest_id: p.manifest_id.unwrap_or(i as u64),
            })
            .collect();
        let bands: Vec<&BinaryMask> = proposals.iter().map(|p| p.contour.mask()).collect();
        let index = InvertedIndex::build(width, height, &bands);
        Ok(ProposalPool {
            frame,
            width,
            height,
            dilation_radius,
            proposals,
            index,
            image: None,
        })
    }

    pub fn with_image(mut self, image: impl Into<PathBuf>) -> Self {
        self.image = Some(image.into());
        self
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dilation_radius(&self) -> u32 {
        self.dilation_radius
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Proposal> {
        self.proposals.get(id as usize)
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn image(&self) -> Option<&PathBuf> {
        self.image.as_ref()
    }

    /// IoU of every proposal against `gt`, indexed by proposal id.
    pub fn overlaps(&self, gt: &BinaryMask) -> Result<Vec<f64>> {
        self.proposals.iter().map(|p| iou(&p.mask, gt)).collect()
    }
}

/// Highest-overlap proposal for `gt`; ties go to the lower id.
pub fn best_overlap(pool: &ProposalPool, gt: &BinaryMask) -> Result<(u32, f64)> {
    let mut best = (0u32, f64::NEG_INFINITY);
    for p in pool.proposals() {
        let v = iou(&p.mask, gt)?;
        if v > best.1 {
            best = (p.id, v);
        }
    }
    Ok(best)
}

/// Source of per-frame pools, e.g. an in-memory map or a lazy disk loader.
pub trait FramePools: Sync {
    fn pool(&self, frame: usize) -> Result<Arc<ProposalPool>>;
}

impl FramePools for BTreeMap<usize, Arc<ProposalPool>> {
    fn pool(&self, frame: usize) -> Result<Arc<ProposalPool>> {
        self.get(&frame).cloned().ok_or(Error::MissingPool(frame))
    }
}

impl FramePools for HashMap<usize, Arc<ProposalPool>> {
    fn pool(&self, frame: usize) -> Result<Arc<ProposalPool>> {
        self.get(&frame).cloned().ok_or(Error::MissingPool(frame))
    }
}

/// Position in the vector is the frame number.
impl FramePools for Vec<Arc<ProposalPool>> {
    fn pool(&self, frame: usize) -> Result<Arc<ProposalPool>> {
        self.get(frame).cloned().ok_or(Error::MissingPool(frame))
    }
}

/// Mean over annotated frames of the best proposal overlap with the ground truth.
pub fn mabo<P: FramePools + ?Sized>(pools: &P, gts: &BTreeMap<usize, BinaryMask>) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::invalid("MABO needs at least one ground-truth frame"));
    }
    let mut best = Vec::with_capacity(gts.len());
    for (&frame, gt) in gts {
        let pool = pools.pool(frame)?;
        best.push(best_overlap(&pool, gt)?.1);
    }
    Ok(crate::num::mean(&best).expect("nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{boundary_pixels, dilate, Pixel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(x: usize, y: usize, s: usize) -> BinaryMask {
        BinaryMask::rect(32, 32, x, y, s, s).unwrap()
    }

    #[test]
    fn full_frame_proposal_indexes_border_band() {
        let full = BinaryMask::full(30, 20).unwrap();
        let pool = ProposalPool::build(0, 30, 20, 5, vec![ProposalInput::new(full.clone(), 0.5, Source::Static)]).unwrap();
        let band = dilate(&boundary_pixels(&full), 5);
        for y in 0..20 {
            for x in 0..30 {
                let listed = !pool.index().at(Pixel::new(x, y)).is_empty();
                assert_eq!(listed, band.get(x as usize, y as usize));
            }
        }
    }

    #[test]
    fn index_matches_brute_force_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(1..=50);
            let inputs: Vec<ProposalInput> = (0..m)
                .map(|_| {
                    let (x, y) = (rng.random_range(0..28), rng.random_range(0..28));
                    let s = rng.random_range(1..(32 - x.max(y)));
                    ProposalInput::new(square(x, y, s), rng.random(), Source::Static)
                })
                .collect();
            let radius = rng.random_range(0..6);
            let pool = ProposalPool::build(0, 32, 32, radius, inputs).unwrap();
            for y in 0..32u32 {
                for x in 0..32u32 {
                    let p = Pixel::new(x, y);
                    let dense: Vec<u32> = pool
                        .proposals()
                        .iter()
                        .filter(|q| dilate(&boundary_pixels(&q.mask), radius).contains_pixel(p))
                        .map(|q| q.id)
                        .collect();
                    assert_eq!(pool.index().at(p), dense.as_slice());
                }
            }
        }
    }

    #[test]
    fn build_validates_inputs() {
        assert!(ProposalPool::build(0, 32, 32, 5, vec![]).is_err());
        let bad_dims = ProposalInput::new(BinaryMask::full(8, 8).unwrap(), 0.5, Source::Static);
        assert!(matches!(
            ProposalPool::build(0, 32, 32, 5, vec![bad_dims]),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_score = ProposalInput::new(square(1, 1, 4), 1.5, Source::Static);
        assert!(ProposalPool::build(0, 32, 32, 5, vec![bad_score]).is_err());
        let empty = ProposalInput::new(BinaryMask::new(32, 32).unwrap(), 0.5, Source::Static);
        assert!(ProposalPool::build(0, 32, 32, 5, vec![empty]).is_err());
    }

    fn pool_of(masks: Vec<BinaryMask>) -> Arc<ProposalPool> {
        let inputs = masks
            .into_iter()
            .map(|m| ProposalInput::new(m, 0.5, Source::Static))
            .collect();
        Arc::new(ProposalPool::build(0, 32, 32, 5, inputs).unwrap())
    }

    #[test]
    fn mabo_cases() {
        let gt0 = square(2, 2, 10);
        let gt1 = square(10, 10, 10);
        let a = BinaryMask::rect(32, 32, 10, 10, 10, 8).unwrap(); // iou 80/100 = 0.8
        let b = BinaryMask::rect(32, 32, 2, 2, 10, 6).unwrap(); // iou 60/100 = 0.6
        let mut pools = BTreeMap::new();
        pools.insert(0, pool_of(vec![b, square(25, 25, 3)]));
        pools.insert(1, pool_of(vec![square(0, 25, 3), a]));
        let gts = BTreeMap::from([(0, gt0.clone()), (1, gt1.clone())]);
        assert!((mabo(&pools, &gts).unwrap() - 0.7).abs() < 1e-12);

        let mut exact = BTreeMap::new();
        exact.insert(0, pool_of(vec![gt0.clone()]));
        exact.insert(1, pool_of(vec![square(25, 25, 3), gt1.clone()]));
        assert_eq!(mabo(&exact, &gts).unwrap(), 1.0);

        let missing = BTreeMap::from([(0, pool_of(vec![gt0.clone()]))]);
        assert!(matches!(mabo(&missing, &gts), Err(Error::MissingPool(1))));
        assert!(mabo(&exact, &BTreeMap::new()).is_err());
    }
}
