//! Simulated annotators that click using the ground-truth mask.
//!
//! Boundary clickers (uniform, submod, active) share a start point: the
//! farthest outline pixel hit by a ray from the centroid along the shape's
//! principal axis. The interior clicker samples foreground pixels. Every
//! policy stops once a proposal close enough to the best available one is
//! in the top-k, or when its budget runs out.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::carving::{CarvingSession, SessionConfig, DEFAULT_BUDGET, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::mask::{iou, shape_principal_axis, trace_contour, BinaryMask, Pixel, TracedContour};
use crate::proposals::ProposalPool;

pub const RAY_STEP: f64 = 0.5;
pub const RAY_HIT_TOLERANCE: f64 = 0.75;
pub const DEFAULT_STOP_MARGIN: f64 = 0.05;
/// Slack on the margin comparison so that e.g. 0.80 - 0.05 admits 0.75.
const MARGIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Interior,
    Uniform,
    Submod,
    Active,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Interior, Policy::Uniform, Policy::Submod, Policy::Active];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Interior => "interior",
            Policy::Uniform => "uniform",
            Policy::Submod => "submod",
            Policy::Active => "active",
        }
    }

    pub fn is_boundary(self) -> bool {
        self != Policy::Interior
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub budget: usize,
    pub k: usize,
    /// Absolute IoU slack relative to the best proposal in the pool.
    pub stop_margin: f64,
    pub seed: u64,
    pub policy: Policy,
}

impl SimConfig {
    pub fn new(policy: Policy, seed: u64) -> Self {
        SimConfig {
            budget: DEFAULT_BUDGET,
            k: DEFAULT_TOP_K,
            stop_margin: DEFAULT_STOP_MARGIN,
            seed,
            policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.stop_margin) {
            return Err(Error::invalid(format!("stop margin {} outside [0, 1]", self.stop_margin)));
        }
        Ok(())
    }

    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            k: self.k,
            budget: self.budget,
            allow_any_accept: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    MarginReached,
    BudgetExhausted,
    /// The policy had no click left to make: the uniform walk completed a
    /// cycle, or every outline point is already clicked or explained.
    CandidatesExhausted,
}

impl StopCause {
    pub fn as_str(self) -> &'static str {
        match self {
            StopCause::MarginReached => "margin_reached",
            StopCause::BudgetExhausted => "budget_exhausted",
            StopCause::CandidatesExhausted => "candidates_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub policy: Policy,
    pub seed: u64,
    pub clicks: Vec<Pixel>,
    pub clicks_used: usize,
    /// Best-overlap proposal among the final top-k.
    pub selected: u32,
    pub achieved_iou: f64,
    /// Best overlap anywhere in the pool.
    pub best_iou: f64,
    pub stopped_by: StopCause,
}

/// Per-proposal overlap with the ground truth, computed once per run.
#[derive(Debug, Clone)]
pub struct GtOverlaps {
    pub ious: Vec<f64>,
    pub best: f64,
}

impl GtOverlaps {
    pub fn new(pool: &ProposalPool, gt: &BinaryMask) -> Result<Self> {
        let ious = pool.overlaps(gt)?;
        let best = ious.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(GtOverlaps { ious, best })
    }

    /// Best-overlap id among `ids`; ties keep the earlier entry.
    pub fn best_of(&self, ids: &[u32]) -> (u32, f64) {
        let mut best = (ids[0], self.ious[ids[0] as usize]);
        for &id in &ids[1..] {
            if self.ious[id as usize] > best.1 {
                best = (id, self.ious[id as usize]);
            }
        }
        best
    }

    pub fn satisfied(&self, top_k: &[u32], margin: f64) -> bool {
        self.best_of(top_k).1 >= self.best - margin - MARGIN_EPS
    }
}

/// True iff the best top-k proposal is within `margin` IoU of the best proposal in the pool.
pub fn stopping_rule(session: &CarvingSession, gt: &BinaryMask, margin: f64) -> Result<bool> {
    let overlaps = GtOverlaps::new(session.pool(), gt)?;
    Ok(overlaps.satisfied(session.top_k(), margin))
}

/// Shared first click of the boundary clickers.
pub fn start_point(gt: &BinaryMask) -> Result<Pixel> {
    let contour = trace_contour(gt)?;
    if gt.count_ones() == 1 {
        return Ok(contour.points[0]);
    }
    Ok(start_on_contour(gt, &contour)?.unwrap_or(contour.points[0]))
}

fn start_on_contour(gt: &BinaryMask, contour: &TracedContour) -> Result<Option<Pixel>> {
    let axis = shape_principal_axis(gt)?;
    let (cx, cy) = axis.centroid;
    let (vx, vy) = axis.direction;
    let mut on_contour = BinaryMask::new(gt.width(), gt.height())?;
    for p in &contour.points {
        on_contour.set(p.x as usize, p.y as usize, true);
    }
    let (w, h) = (gt.width() as f64, gt.height() as f64);
    let tol2 = RAY_HIT_TOLERANCE * RAY_HIT_TOLERANCE;

    // (distance² from centroid, hit on the +v side, pixel)
    let mut best: Option<(f64, bool, Pixel)> = None;
    for (sign, plus) in [(1.0, true), (-1.0, false)] {
        let mut t = 0.0;
        loop {
            let (px, py) = (cx + sign * t * vx, cy + sign * t * vy);
            if px < -1.0 || py < -1.0 || px > w || py > h {
                break;
            }
            let (x0, x1) = ((px - RAY_HIT_TOLERANCE).floor() as i64, (px + RAY_HIT_TOLERANCE).ceil() as i64);
            let (y0, y1) = ((py - RAY_HIT_TOLERANCE).floor() as i64, (py + RAY_HIT_TOLERANCE).ceil() as i64);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 - px, y as f64 - py);
                    if dx * dx + dy * dy > tol2 || !on_contour.contains(x, y) {
                        continue;
                    }
                    let p = Pixel::new(x as u32, y as u32);
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let better = match best {
                        None => true,
                        Some((bd, bplus, bp)) => {
                            d2 > bd
                                || (d2 == bd && plus && !bplus)
                                || (d2 == bd && plus == bplus && (p.y, p.x) < (bp.y, bp.x))
                        }
                    };
                    if better {
                        best = Some((d2, plus, p));
                    }
                }
            }
            t += RAY_STEP;
        }
    }
    Ok(best.map(|b| b.2))
}

trait ClickSource {
    fn next_click(&mut self, session: &CarvingSession) -> Option<Pixel>;
}

fn drive(
    gt: &BinaryMask,
    session: &mut CarvingSession,
    config: &SimConfig,
    source: &mut dyn ClickSource,
) -> Result<SimTrace> {
    config.validate()?;
    let overlaps = GtOverlaps::new(session.pool(), gt)?;
    let budget = config.budget.min(session.clicks_remaining() + session.clicks().len());
    let mut clicks = Vec::new();
    let stopped_by = loop {
        if session.clicks().len() >= budget {
            break StopCause::BudgetExhausted;
        }
        let Some(c) = source.next_click(session) else {
            break StopCause::CandidatesExhausted;
        };
        session.click_votes(c)?;
        clicks.push(c);
        if overlaps.satisfied(session.top_k(), config.stop_margin) {
            break StopCause::MarginReached;
        }
    };
    let (selected, achieved_iou) = overlaps.best_of(session.top_k());
    Ok(SimTrace {
        policy: config.policy,
        seed: config.seed,
        clicks_used: clicks.len(),
        clicks,
        selected,
        achieved_iou,
        best_iou: overlaps.best,
        stopped_by,
    })
}

struct UniformWalk {
    points: Vec<Pixel>,
    start: usize,
    step: usize,
    taken: usize,
}

impl ClickSource for UniformWalk {
    fn next_click(&mut self, _: &CarvingSession) -> Option<Pixel> {
        let offset = self.taken * self.step;
        if offset >= self.points.len() {
            return None;
        }
        self.taken += 1;
        Some(self.points[(self.start + offset) % self.points.len()])
    }
}

/// Greedy farthest-point coverage of the outline, optionally skipping points
/// already explained by the current top-ranked proposal.
struct FarthestPoint {
    points: Vec<Pixel>,
    start: Pixel,
    /// Squared distance from each outline point to its nearest click so far.
    nearest: Vec<u64>,
    last: Option<Pixel>,
    skip_explained: bool,
}

impl FarthestPoint {
    fn new(contour: TracedContour, start: Pixel, skip_explained: bool) -> Self {
        let n = contour.points.len();
        FarthestPoint {
            points: contour.points,
            start,
            nearest: vec![u64::MAX; n],
            last: None,
            skip_explained,
        }
    }
}

impl ClickSource for FarthestPoint {
    fn next_click(&mut self, session: &CarvingSession) -> Option<Pixel> {
        let Some(last) = self.last else {
            self.last = Some(self.start);
            return Some(self.start);
        };
        for (d, p) in self.nearest.iter_mut().zip(&self.points) {
            *d = (*d).min(p.dist2(last));
        }
        let explained = self
            .skip_explained
            .then(|| session.pool().proposals()[session.top1() as usize].contour.mask());
        let mut best: Option<(u64, usize)> = None;
        for (i, (&d, p)) in self.nearest.iter().zip(&self.points).enumerate() {
            if d == 0 || explained.is_some_and(|m| m.contains_pixel(*p)) {
                continue;
            }
            if best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best?;
        self.last = Some(self.points[i]);
        self.last
    }
}

struct InteriorSamples {
    queue: std::vec::IntoIter<Pixel>,
}

impl ClickSource for InteriorSamples {
    fn next_click(&mut self, _: &CarvingSession) -> Option<Pixel> {
        self.queue.next()
    }
}

/// Clicks every `d = max(1, N / budget)` outline points from the start point.
pub fn uniform_clicker(gt: &BinaryMask, session: &mut CarvingSession, config: &SimConfig) -> Result<SimTrace> {
    let contour = trace_contour(gt)?;
    let start = contour.nearest_index(start_point(gt)?);
    let step = (contour.len() / config.budget.max(1)).max(1);
    let mut walk = UniformWalk {
        points: contour.points,
        start,
        step,
        taken: 0,
    };
    drive(gt, session, config, &mut walk)
}

/// Each click goes to the outline point farthest from all previous clicks.
pub fn submod_clicker(gt: &BinaryMask, session: &mut CarvingSession, config: &SimConfig) -> Result<SimTrace> {
    let start = start_point(gt)?;
    let mut src = FarthestPoint::new(trace_contour(gt)?, start, false);
    drive(gt, session, config, &mut src)
}

/// Like [`submod_clicker`], but outline points inside the current top-1
/// proposal's contour band are not candidates.
pub fn active_clicker(gt: &BinaryMask, session: &mut CarvingSession, config: &SimConfig) -> Result<SimTrace> {
    let start = start_point(gt)?;
    let mut src = FarthestPoint::new(trace_contour(gt)?, start, true);
    drive(gt, session, config, &mut src)
}

/// The interior clicker's sequence: `budget` foreground pixels without
/// replacement, then with replacement once the foreground is used up.
pub fn interior_samples(gt: &BinaryMask, budget: usize, seed: u64) -> Result<Vec<Pixel>> {
    let fg: Vec<Pixel> = gt.iter_ones().collect();
    if fg.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if fg.len() >= budget {
        return Ok(rand::seq::index::sample(&mut rng, fg.len(), budget)
            .into_iter()
            .map(|i| fg[i])
            .collect());
    }
    let mut all = fg.clone();
    all.shuffle(&mut rng);
    while all.len() < budget {
        all.push(fg[rng.random_range(0..fg.len())]);
    }
    Ok(all)
}

/// Clicks foreground pixels drawn by [`interior_samples`] with `config.seed`.
pub fn interior_clicker(gt: &BinaryMask, session: &mut CarvingSession, config: &SimConfig) -> Result<SimTrace> {
    let mut src = InteriorSamples {
        queue: interior_samples(gt, config.budget, config.seed)?.into_iter(),
    };
    drive(gt, session, config, &mut src)
}

/// Run `config.policy` on a fresh session over `pool`.
pub fn simulate(gt: &BinaryMask, pool: Arc<ProposalPool>, config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let mut session = CarvingSession::new(pool, config.session_config())?;
    match config.policy {
        Policy::Interior => interior_clicker(gt, &mut session, config),
        Policy::Uniform => uniform_clicker(gt, &mut session, config),
        Policy::Submod => submod_clicker(gt, &mut session, config),
        Policy::Active => active_clicker(gt, &mut session, config),
    }
}

/// Zero-click baseline: best-overlap proposal among the top-k by objectness.
pub fn objectness_baseline(pool: &ProposalPool, gt: &BinaryMask, k: usize) -> Result<(u32, f64)> {
    let ranking = crate::carving::rank(pool, &vec![0; pool.len()]);
    let top = ranking.top(k.max(1));
    let mut best = (top[0], iou(&pool.proposals()[top[0] as usize].mask, gt)?);
    for &id in &top[1..] {
        let v = iou(&pool.proposals()[id as usize].mask, gt)?;
        if v > best.1 {
            best = (id, v);
        }
    }
    Ok(best)
}
