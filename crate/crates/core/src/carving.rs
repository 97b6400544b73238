//! Interactive carving: each click votes for every proposal whose
//! contour band covers it, and the pool is re-ranked by
//! `(votes desc, objectness desc, id asc)`.

use std::sync::Arc;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Pixel};
use crate::proposals::ProposalPool;

/// Proposals shown per round, enough to tile one screen.
pub const DEFAULT_TOP_K: usize = 9;
pub const DEFAULT_BUDGET: usize = 10;
/// Number of top-ranked contours summed into the heat-map.
pub const HEATMAP_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub k: usize,
    pub budget: usize,
    /// Accept any proposal id, not only the current top-k.
    pub allow_any_accept: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            k: DEFAULT_TOP_K,
            budget: DEFAULT_BUDGET,
            allow_any_accept: false,
        }
    }
}

/// Total order over all proposal ids in a pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking(Vec<u32>);

impl Ranking {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    /// The first `min(k, m)` ids.
    pub fn top(&self, k: usize) -> &[u32] {
        &self.0[..k.min(self.0.len())]
    }

    pub fn into_ids(self) -> Vec<u32> {
        self.0
    }
}

/// Sort by votes, then objectness, then id. `votes[j]` belongs to proposal `j`.
pub fn rank(pool: &ProposalPool, votes: &[u32]) -> Ranking {
    let props = pool.proposals();
    let mut ids: Vec<u32> = (0..props.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        let (pa, pb) = (&props[a as usize], &props[b as usize]);
        votes[b as usize]
            .cmp(&votes[a as usize])
            .then(pb.objectness.total_cmp(&pa.objectness))
            .then(a.cmp(&b))
    });
    Ranking(ids)
}

/// Per-pixel count of top-ranked contour bands covering the pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourHeatMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, values in `0..=HEATMAP_DEPTH`.
    pub counts: Vec<u8>,
}

impl ContourHeatMap {
    pub fn from_ids(pool: &ProposalPool, ids: &[u32]) -> Self {
        let (width, height) = pool.dims();
        let mut counts = vec![0u8; width * height];
        for &id in ids {
            for i in pool.proposals()[id as usize].contour.mask().iter_linear() {
                counts[i] += 1;
            }
        }
        ContourHeatMap {
            width,
            height,
            counts,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.counts[y * self.width + x]
    }

    pub fn max(&self) -> u8 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// State after a click, undo, or on request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickResult {
    /// Proposals that gained a vote from the latest click (0 for undo/snapshot).
    pub matched: usize,
    pub ranking: Ranking,
    pub top_k: Vec<u32>,
    pub heatmap: ContourHeatMap,
}

/// One object being carved out of one frame's pool.
#[derive(Debug, Clone)]
pub struct CarvingSession {
    pool: Arc<ProposalPool>,
    config: SessionConfig,
    clicks: Vec<Pixel>,
    votes: Vec<u32>,
    ranking: Ranking,
    accepted: Option<u32>,
    created: SystemTime,
    updated: SystemTime,
}

impl CarvingSession {
    pub fn new(pool: Arc<ProposalPool>, config: SessionConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if config.budget == 0 {
            return Err(Error::invalid("click budget must be at least 1"));
        }
        let votes = vec![0; pool.len()];
        let ranking = rank(&pool, &votes);
        let now = SystemTime::now();
        Ok(CarvingSession {
            pool,
            config,
            clicks: Vec::new(),
            votes,
            ranking,
            accepted: None,
            created: now,
            updated: now,
        })
    }

    pub fn pool(&self) -> &Arc<ProposalPool> {
        &self.pool
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn clicks(&self) -> &[Pixel] {
        &self.clicks
    }

    pub fn votes(&self) -> &[u32] {
        &self.votes
    }

    pub fn ranking(&self) -> &Ranking {
        &self.ranking
    }

    pub fn top_k(&self) -> &[u32] {
        self.ranking.top(self.config.k)
    }

    pub fn top1(&self) -> u32 {
        self.ranking.ids()[0]
    }

    pub fn accepted(&self) -> Option<u32> {
        self.accepted
    }

    pub fn created(&self) -> SystemTime {
        self.created
    }

    pub fn updated(&self) -> SystemTime {
        self.updated
    }

    pub fn clicks_remaining(&self) -> usize {
        self.config.budget - self.clicks.len()
    }

    /// Record a click and update votes and ranking without building the
    /// heat-map. Returns the number of proposals that gained a vote.
    pub fn click_votes(&mut self, c: Pixel) -> Result<usize> {
        if let Some(id) = self.accepted {
            return Err(Error::SessionAccepted(id));
        }
        let (w, h) = self.pool.dims();
        if c.x as usize >= w || c.y as usize >= h {
            return Err(Error::OutOfBounds {
                x: c.x as i64,
                y: c.y as i64,
                width: w,
                height: h,
            });
        }
        if self.clicks.len() >= self.config.budget {
            return Err(Error::BudgetExhausted {
                budget: self.config.budget,
            });
        }
        let hits = self.pool.index().at(c);
        for &j in hits {
            self.votes[j as usize] += 1;
        }
        let matched = hits.len();
        self.clicks.push(c);
        if matched > 0 {
            self.ranking = rank(&self.pool, &self.votes);
        }
        self.updated = SystemTime::now();
        Ok(matched)
    }

    pub fn click(&mut self, c: Pixel) -> Result<ClickResult> {
        let matched = self.click_votes(c)?;
        Ok(self.result(matched))
    }

    /// Drop the latest click; votes are recounted from the remaining clicks.
    pub fn undo(&mut self) -> Result<ClickResult> {
        if let Some(id) = self.accepted {
            return Err(Error::SessionAccepted(id));
        }
        if self.clicks.pop().is_none() {
            return Err(Error::EmptyHistory);
        }
        self.recount();
        Ok(self.result(0))
    }

    /// Freeze the session on `id` and return its mask.
    pub fn accept(&mut self, id: u32) -> Result<BinaryMask> {
        if let Some(prev) = self.accepted {
            return Err(Error::SessionAccepted(prev));
        }
        let proposal = self.pool.get(id).ok_or(Error::UnknownProposal(id))?;
        if !self.config.allow_any_accept && !self.top_k().contains(&id) {
            return Err(Error::NotInTopK {
                id,
                k: self.config.k,
            });
        }
        self.accepted = Some(id);
        self.updated = SystemTime::now();
        Ok(proposal.mask.clone())
    }

    /// Clear clicks, votes and any acceptance.
    pub fn reset(&mut self) {
        self.clicks.clear();
        self.accepted = None;
        self.recount();
    }

    pub fn heatmap(&self) -> ContourHeatMap {
        ContourHeatMap::from_ids(&self.pool, self.ranking.top(HEATMAP_DEPTH))
    }

    /// Current state in the same shape as a click response.
    pub fn snapshot(&self) -> ClickResult {
        self.result(0)
    }

    fn result(&self, matched: usize) -> ClickResult {
        ClickResult {
            matched,
            ranking: self.ranking.clone(),
            top_k: self.top_k().to_vec(),
            heatmap: self.heatmap(),
        }
    }

    fn recount(&mut self) {
        self.votes.iter_mut().for_each(|v| *v = 0);
        for c in &self.clicks {
            for &j in self.pool.index().at(*c) {
                self.votes[j as usize] += 1;
            }
        }
        self.ranking = rank(&self.pool, &self.votes);
        self.updated = SystemTime::now();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{boundary_pixels, dilate};
    use crate::proposals::{ProposalInput, Source};
    use proptest::prelude::*;

    fn pool(entries: &[(BinaryMask, f64)]) -> Arc<ProposalPool> {
        let (w, h) = entries[0].0.dims();
        let inputs = entries
            .iter()
            .map(|(m, s)| ProposalInput::new(m.clone(), *s, Source::Static))
            .collect();
        Arc::new(ProposalPool::build(0, w, h, 5, inputs).unwrap())
    }

    fn rect(x: usize, y: usize, w: usize, h: usize) -> BinaryMask {
        BinaryMask::rect(64, 48, x, y, w, h).unwrap()
    }

    fn session(p: Arc<ProposalPool>) -> CarvingSession {
        CarvingSession::new(p, SessionConfig::default()).unwrap()
    }

    #[test]
    fn click_outside_every_contour() {
        let p = pool(&[(rect(2, 2, 10, 10), 0.2), (rect(30, 2, 10, 10), 0.7)]);
        let mut s = session(p);
        let before = s.ranking().clone();
        let r = s.click(Pixel::new(60, 40)).unwrap();
        assert_eq!(r.matched, 0);
        assert_eq!(r.ranking, before);
        assert_eq!(s.clicks().len(), 1);
        assert_eq!(s.votes(), &[0, 0]);
    }

    #[test]
    fn votes_then_objectness_tie_break() {
        // A and B have an edge near (20, 10); C is far away
        let a = rect(20, 5, 10, 10);
        let b = rect(18, 4, 12, 20);
        let c = rect(50, 30, 8, 8);
        let p = pool(&[(a, 0.2), (b, 0.9), (c, 0.5)]);
        let mut s = session(p);
        let r = s.click(Pixel::new(20, 10)).unwrap();
        assert_eq!(s.votes(), &[1, 1, 0]);
        assert_eq!(r.matched, 2);
        assert_eq!(r.ranking.ids(), &[1, 0, 2]);
    }

    #[test]
    fn ten_clicks_on_one_contour() {
        let p = pool(&[(rect(2, 2, 10, 10), 0.1), (rect(30, 20, 20, 20), 0.9)]);
        let mut s = session(p);
        for i in 0..10 {
            s.click(Pixel::new(2 + i, 2)).unwrap();
        }
        assert_eq!(s.votes()[0], 10);
        assert_eq!(s.top1(), 0);
        assert!(matches!(
            s.click(Pixel::new(2, 2)),
            Err(Error::BudgetExhausted { budget: 10 })
        ));
    }

    #[test]
    fn rank_examples() {
        let p = pool(&[(rect(1, 1, 3, 3), 0.1), (rect(1, 1, 3, 3), 0.9), (rect(1, 1, 3, 3), 0.5)]);
        assert_eq!(rank(&p, &[0, 0, 0]).ids(), &[1, 2, 0]);
        let p = pool(&[(rect(1, 1, 3, 3), 0.3), (rect(1, 1, 3, 3), 0.9), (rect(1, 1, 3, 3), 0.5)]);
        assert_eq!(rank(&p, &[2, 2, 1]).ids(), &[1, 0, 2]);
        let p = pool(&[(rect(1, 1, 3, 3), 0.5), (rect(1, 1, 3, 3), 0.5), (rect(1, 1, 3, 3), 0.5)]);
        assert_eq!(rank(&p, &[1, 1, 1]).ids(), &[0, 1, 2]);
    }

    #[test]
    fn top_k_truncates() {
        let entries: Vec<_> = (0..5).map(|i| (rect(i * 5, 0, 4, 4), 0.1 * i as f64)).collect();
        let s = session(pool(&entries));
        assert_eq!(s.top_k(), &[4, 3, 2, 1, 0]);
    }

    #[test]
    fn heatmap_single_and_identical() {
        let m = rect(10, 10, 20, 20);
        let s = session(pool(&[(m.clone(), 0.5)]));
        let h = s.heatmap();
        let band = dilate(&boundary_pixels(&m), 5);
        for y in 0..48 {
            for x in 0..64 {
                assert_eq!(h.get(x, y), band.get(x, y) as u8);
            }
        }
        let same: Vec<_> = (0..5).map(|_| (m.clone(), 0.5)).collect();
        let h = session(pool(&same)).heatmap();
        assert!(h.counts.iter().all(|&v| v == 0 || v == 5));
        assert_eq!(h.max(), 5);
    }

    #[test]
    fn undo_and_accept() {
        let p = pool(&[(rect(2, 2, 10, 10), 0.2), (rect(30, 20, 20, 20), 0.7), (rect(5, 30, 9, 9), 0.4)]);
        let mut s = session(p.clone());
        let fresh_votes = s.votes().to_vec();
        let fresh_rank = s.ranking().clone();
        s.click(Pixel::new(2, 5)).unwrap();
        s.undo().unwrap();
        assert_eq!(s.votes(), fresh_votes.as_slice());
        assert_eq!(s.ranking(), &fresh_rank);
        assert!(matches!(s.undo(), Err(Error::EmptyHistory)));

        s.click(Pixel::new(2, 5)).unwrap();
        s.click(Pixel::new(30, 25)).unwrap();
        s.undo().unwrap();
        s.undo().unwrap();
        assert!(s.votes().iter().all(|&v| v == 0));

        for c in [Pixel::new(2, 5), Pixel::new(11, 5), Pixel::new(5, 2)] {
            s.click(c).unwrap();
        }
        let top = s.top1();
        assert_eq!(top, 0);
        let mask = s.accept(top).unwrap();
        assert_eq!(mask, p.get(0).unwrap().mask);
        assert!(matches!(s.click(Pixel::new(1, 1)), Err(Error::SessionAccepted(0))));
        assert!(matches!(s.accept(1), Err(Error::SessionAccepted(0))));
        s.reset();
        assert!(s.accepted().is_none());
        assert!(s.clicks().is_empty());
    }

    #[test]
    fn accept_outside_top_k_is_rejected_unless_relaxed() {
        let entries: Vec<_> = (0..12).map(|i| (rect(i * 5, 0, 4, 4), 0.05 * i as f64)).collect();
        let p = pool(&entries);
        let mut s = CarvingSession::new(p.clone(), SessionConfig::default()).unwrap();
        assert!(matches!(s.accept(0), Err(Error::NotInTopK { id: 0, k: 9 })));
        assert!(matches!(s.accept(99), Err(Error::UnknownProposal(99))));
        let cfg = SessionConfig {
            allow_any_accept: true,
            ..Default::default()
        };
        let mut s = CarvingSession::new(p, cfg).unwrap();
        assert!(s.accept(0).is_ok());
    }

    #[test]
    fn out_of_bounds_click() {
        let mut s = session(pool(&[(rect(2, 2, 10, 10), 0.2)]));
        assert!(matches!(s.click(Pixel::new(64, 0)), Err(Error::OutOfBounds { .. })));
        assert!(s.clicks().is_empty());
    }

    #[test]
    fn tolerance_boundary() {
        let m = rect(20, 10, 30, 30);
        let mut s = CarvingSession::new(pool(&[(m, 0.5)]), SessionConfig { budget: 100, ..Default::default() }).unwrap();
        // left edge is x = 20; Chebyshev distance 5 and 6 outside and inside
        for (x, expect) in [(15, 1), (14, 0), (25, 1), (26, 0)] {
            let matched = s.click_votes(Pixel::new(x, 25)).unwrap();
            assert_eq!(matched, expect, "x = {x}");
        }
    }

    fn brute_votes(p: &ProposalPool, clicks: &[Pixel]) -> Vec<u32> {
        p.proposals()
            .iter()
            .map(|q| {
                let band = dilate(&boundary_pixels(&q.mask), p.dilation_radius());
                clicks.iter().filter(|c| band.contains_pixel(**c)).count() as u32
            })
            .collect()
    }

    fn brute_rank(p: &ProposalPool, votes: &[u32]) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..p.len() as u32).collect();
        // selection sort with the documented key, no shared code
        for i in 0..ids.len() {
            let mut best = i;
            for j in i + 1..ids.len() {
                let (a, b) = (ids[j] as usize, ids[best] as usize);
                let better = votes[a] > votes[b]
                    || (votes[a] == votes[b]
                        && (p.proposals()[a].objectness > p.proposals()[b].objectness
                            || (p.proposals()[a].objectness == p.proposals()[b].objectness && a < b)));
                if better {
                    best = j;
                }
            }
            ids.swap(i, best);
        }
        ids
    }

    /// Rectangles with an objectness bucket, clicks, and undo flags.
    type Case = (Vec<(usize, usize, usize, usize, u8)>, Vec<(u32, u32)>, Vec<bool>);

    fn arb_case() -> impl Strategy<Value = Case> {
        (
            proptest::collection::vec((0usize..40, 0usize..30, 1usize..24, 1usize..18, 0u8..4), 1..20),
            proptest::collection::vec((0u32..64, 0u32..48), 0..10),
            proptest::collection::vec(any::<bool>(), 10),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recount_identity_and_ranking((rects, clicks, undos) in arb_case()) {
            let entries: Vec<_> = rects
                .iter()
                .map(|&(x, y, w, h, s)| (rect(x, y, w, h), s as f64 / 4.0))
                .collect();
            let p = pool(&entries);
            let mut s = session(p.clone());
            let mut live = Vec::new();
            for (i, (x, y)) in clicks.iter().enumerate() {
                let c = Pixel::new(*x, *y);
                let before = s.votes().to_vec();
                let r = s.click(c).unwrap();
                live.push(c);
                let gained = s.votes().iter().zip(&before).filter(|(a, b)| a > b).count();
                prop_assert_eq!(gained, r.matched);
                prop_assert!(s.votes().iter().zip(&before).all(|(a, b)| a - b <= 1));
                if undos[i] {
                    s.undo().unwrap();
                    live.pop();
                }
                let want_votes = brute_votes(&p, &live);
                prop_assert_eq!(s.votes(), want_votes.as_slice());
                let want_rank = brute_rank(&p, s.votes());
                prop_assert_eq!(s.ranking().ids(), want_rank.as_slice());
                prop_assert_eq!(s.top_k(), &s.ranking().ids()[..9.min(p.len())]);
            }
            let h = s.heatmap();
            let top5 = &s.ranking().ids()[..5.min(p.len())];
            for y in 0..48 {
                for x in 0..64 {
                    let n = top5.iter().filter(|&&j| p.proposals()[j as usize].contour.mask().get(x, y)).count();
                    prop_assert_eq!(h.get(x, y) as usize, n);
                }
            }
        }

        #[test]
        fn click_order_does_not_matter((rects, clicks, _u) in arb_case()) {
            let entries: Vec<_> = rects
                .iter()
                .map(|&(x, y, w, h, s)| (rect(x, y, w, h), s as f64 / 4.0))
                .collect();
            let p = pool(&entries);
            let mut fwd = session(p.clone());
            let mut rev = session(p);
            for &(x, y) in &clicks {
                fwd.click_votes(Pixel::new(x, y)).unwrap();
            }
            for &(x, y) in clicks.iter().rev() {
                rev.click_votes(Pixel::new(x, y)).unwrap();
            }
            prop_assert_eq!(fwd.votes(), rev.votes());
            prop_assert_eq!(fwd.ranking(), rev.ranking());
        }
    }
}
