use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::proposals::{ProposalInput, Source};
use proptest::prelude::*;

const W: usize = 48;
const H: usize = 32;

fn square(x: usize, y: usize, s: usize) -> BinaryMask {
    BinaryMask::rect(W, H, x, y, s, s).unwrap()
}

fn build(frame: usize, masks: Vec<(BinaryMask, f64)>) -> Arc<ProposalPool> {
    let inputs = masks
        .into_iter()
        .map(|(m, o)| ProposalInput::new(m, o, Source::Static))
        .collect();
    Arc::new(ProposalPool::build(frame, W, H, 5, inputs).unwrap())
}

fn distractors() -> Vec<(BinaryMask, f64)> {
    vec![(square(40, 0, 6), 0.9), (square(0, 26, 5), 0.8), (square(40, 25, 7), 0.7)]
}

/// Square of side 8 moving one pixel right per frame, wrapping after 36.
fn moving(frame: usize) -> BinaryMask {
    square(frame % 36, 10, 8)
}

fn moving_pools(n: usize) -> Vec<Arc<ProposalPool>> {
    (0..n)
        .map(|t| {
            let mut m = distractors();
            m.push((moving(t), 0.1));
            build(t, m)
        })
        .collect()
}

#[test]
fn identity_chain() {
    let m = square(10, 10, 9);
    let pools: Vec<_> = (0..12)
        .map(|t| {
            let mut v = distractors();
            v.insert(t % 3, (m.clone(), 0.2));
            build(t, v)
        })
        .collect();
    let out = propagate_chain(&pools, &KeyframeInit::new(0, m.clone()), Direction::Forward, 11, &PropagationConfig::default()).unwrap();
    assert_eq!(out.len(), 11);
    for (i, f) in out.iter().enumerate() {
        assert_eq!(f.frame, i + 1);
        assert_eq!(iou(&f.mask, &m).unwrap(), 1.0);
        assert!(!f.drifted);
    }
}

#[test]
fn follows_translating_square() {
    let pools = moving_pools(30);
    let out = propagate_chain(&pools, &KeyframeInit::new(0, moving(0)), Direction::Forward, 29, &PropagationConfig::default()).unwrap();
    for f in &out {
        assert_eq!(f.mask, moving(f.frame), "frame {}", f.frame);
        assert_eq!(f.proposal, Some(3));
        // 7 of 9 columns shared per step
        assert!((f.link_iou.unwrap() - 7.0 * 8.0 / (9.0 * 8.0)).abs() < 1e-12);
    }
}

#[test]
fn distractor_only_frame_carries_mask() {
    let mut pools = moving_pools(6);
    pools[3] = build(3, distractors());
    let out = propagate_chain(&pools, &KeyframeInit::new(0, moving(0)), Direction::Forward, 5, &PropagationConfig::default()).unwrap();
    let f3 = &out[2];
    assert!(f3.drifted);
    assert_eq!(f3.proposal, None);
    assert_eq!(f3.mask, moving(2));
    assert_eq!(f3.link_iou, Some(0.0));
    // the chain picks the object back up from the carried mask
    assert!(!out[3].drifted);
    assert_eq!(out[3].mask, moving(4));
}

#[test]
fn drift_floor_is_inclusive() {
    // IoU exactly 0.05: 1 px overlap over a 20 px union
    let prev = BinaryMask::rect(W, H, 0, 0, 10, 1).unwrap();
    let next = BinaryMask::rect(W, H, 9, 0, 11, 1).unwrap();
    assert_eq!(iou(&prev, &next).unwrap(), 0.05);
    let pools = vec![build(0, vec![(prev.clone(), 0.5)]), build(1, vec![(next.clone(), 0.5)])];
    let out = propagate_chain(&pools, &KeyframeInit::new(0, prev.clone()), Direction::Forward, 1, &PropagationConfig::default()).unwrap();
    assert!(!out[0].drifted);
    let strict = PropagationConfig { drift_floor: 0.06 };
    let out = propagate_chain(&pools, &KeyframeInit::new(0, prev.clone()), Direction::Forward, 1, &strict).unwrap();
    assert!(out[0].drifted);
    assert_eq!(out[0].mask, prev);
}

#[test]
fn successor_ties_prefer_objectness_then_id() {
    let prev = square(10, 10, 8);
    let left = square(9, 10, 8);
    let right = square(11, 10, 8);
    let pool = build(0, vec![(left.clone(), 0.3), (right.clone(), 0.6), (square(40, 0, 4), 0.9)]);
    assert_eq!(best_successor(&pool, &prev).unwrap().unwrap().0, 1);
    let pool = build(0, vec![(left, 0.6), (right, 0.6)]);
    assert_eq!(best_successor(&pool, &prev).unwrap().unwrap().0, 0);
}

#[test]
fn chain_errors() {
    let pools = moving_pools(3);
    let cfg = PropagationConfig::default();
    assert!(matches!(
        propagate_chain(&pools, &KeyframeInit::new(1, moving(1)), Direction::Forward, 5, &cfg),
        Err(Error::MissingPool(3))
    ));
    let wrong = BinaryMask::rect(W + 1, H, 0, 0, 4, 4).unwrap();
    assert!(matches!(
        propagate_chain(&pools, &KeyframeInit::new(0, wrong), Direction::Forward, 1, &cfg),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(propagate_chain(&pools, &KeyframeInit::new(1, moving(1)), Direction::Backward, 2, &cfg).is_err());
}

#[test]
fn single_keyframe_matches_forward_chain() {
    let pools = moving_pools(20);
    let cfg = PropagationConfig::default();
    let init = KeyframeInit::new(0, moving(0)).with_proposal(3);
    let track = propagate_keyframed(&pools, std::slice::from_ref(&init), 20, &cfg).unwrap();
    let chain = propagate_chain(&pools, &init, Direction::Forward, 19, &cfg).unwrap();
    assert_eq!(track.frames[0].mask, init.mask);
    assert!(track.frames[0].keyframe);
    assert_eq!(track.frames[0].proposal, Some(3));
    assert_eq!(&track.frames[1..], chain.as_slice());
}

#[test]
fn spans_come_from_their_left_keyframe() {
    let n = 150;
    let pools = moving_pools(n);
    let cfg = PropagationConfig::default();
    // a deliberately offset keyframe at 100 makes its span distinguishable
    let k0 = KeyframeInit::new(0, moving(0));
    let k100 = KeyframeInit::new(100, square(30, 20, 4));
    let track = propagate_keyframed(&pools, &[k100.clone(), k0.clone()], n, &cfg).unwrap();
    assert_eq!(track.keyframes, BTreeSet::from([0, 100]));
    let a = propagate_chain(&pools, &k0, Direction::Forward, 99, &cfg).unwrap();
    let b = propagate_chain(&pools, &k100, Direction::Forward, 49, &cfg).unwrap();
    assert_eq!(&track.frames[1..100], a.as_slice());
    assert_eq!(&track.frames[101..], b.as_slice());
    assert_eq!(track.frames[100].mask, k100.mask);
}

#[test]
fn leading_frames_fill_backward() {
    let pools = moving_pools(30);
    let track = propagate_keyframed(&pools, &[KeyframeInit::new(12, moving(12))], 30, &PropagationConfig::default()).unwrap();
    for f in &track.frames {
        assert_eq!(f.frame, track.frames.iter().position(|g| g == f).unwrap());
        assert_eq!(f.mask, moving(f.frame));
    }
}

#[test]
fn second_keyframe_recovers_drift() {
    // the object jumps to a new place at frame 50, far from the chained mask
    let n = 150;
    let obj = |t: usize| if t < 50 { square(4, 4, 8) } else { square(30, 18, 8) };
    let pools: Vec<_> = (0..n)
        .map(|t| {
            let mut m = vec![(square(40, 0, 6), 0.9)];
            m.push((obj(t), 0.1));
            build(t, m)
        })
        .collect();
    let cfg = PropagationConfig::default();
    let gt_iou = |track: &VideoTrack, range: std::ops::Range<usize>| -> f64 {
        range.clone().map(|t| iou(&track.frames[t].mask, &obj(t)).unwrap()).sum::<f64>() / range.len() as f64
    };
    let only0 = propagate_keyframed(&pools, &[KeyframeInit::new(0, obj(0))], n, &cfg).unwrap();
    assert_eq!(gt_iou(&only0, 100..150), 0.0);
    assert!(only0.frames[50..].iter().all(|f| f.drifted));

    let both = propagate_keyframed(&pools, &[KeyframeInit::new(0, obj(0)), KeyframeInit::new(100, obj(100))], n, &cfg).unwrap();
    assert_eq!(gt_iou(&both, 100..150), 1.0);
    assert_eq!(both.frames[..100], only0.frames[..100]);
}

#[test]
fn insert_keyframe_touches_only_its_span() {
    let n = 60;
    let pools = moving_pools(n);
    let cfg = PropagationConfig::default();
    let mut track = propagate_keyframed(&pools, &[KeyframeInit::new(10, moving(10)), KeyframeInit::new(40, moving(40))], n, &cfg).unwrap();
    let before = track.clone();
    let touched = insert_keyframe(&mut track, &pools, KeyframeInit::new(25, square(30, 20, 5)), &cfg).unwrap();
    assert_eq!(touched, (25..40).collect::<Vec<_>>());
    assert_eq!(track.frames[..25], before.frames[..25]);
    assert_eq!(track.frames[40..], before.frames[40..]);
    assert_eq!(track.frames[25].mask, square(30, 20, 5));
    assert!(track.frames[25].keyframe);

    // a new first keyframe also owns the leading frames
    let touched = insert_keyframe(&mut track, &pools, KeyframeInit::new(5, moving(5)), &cfg).unwrap();
    assert_eq!(touched, (0..10).collect::<Vec<_>>());
    assert!(track.frames[10].keyframe);
    assert_eq!(track.keyframes, BTreeSet::from([5, 10, 25, 40]));
    assert!(insert_keyframe(&mut track, &pools, KeyframeInit::new(60, moving(0)), &cfg).is_err());
}

#[test]
fn keyframed_errors() {
    let pools = moving_pools(5);
    let cfg = PropagationConfig::default();
    assert!(propagate_keyframed(&pools, &[], 5, &cfg).is_err());
    assert!(propagate_keyframed(&pools, &[KeyframeInit::new(5, moving(0))], 5, &cfg).is_err());
    let dup = [KeyframeInit::new(1, moving(1)), KeyframeInit::new(1, moving(1))];
    assert!(propagate_keyframed(&pools, &dup, 5, &cfg).is_err());
    let sparse: BTreeMap<usize, Arc<ProposalPool>> = pools.iter().cloned().enumerate().filter(|(i, _)| *i != 3).collect();
    assert!(matches!(
        propagate_keyframed(&sparse, &[KeyframeInit::new(0, moving(0))], 5, &cfg),
        Err(Error::MissingPool(3))
    ));
}

#[test]
fn schedule() {
    assert_eq!(keyframe_schedule(250, 100).unwrap(), vec![0, 100, 200]);
    assert_eq!(keyframe_schedule(3, 1).unwrap(), vec![0, 1, 2]);
    assert!(keyframe_schedule(0, 5).unwrap().is_empty());
    assert!(keyframe_schedule(10, 0).is_err());
}

#[test]
fn manifest_round_trip() {
    let mut pools = moving_pools(12);
    pools[6] = build(6, distractors());
    let track = propagate_keyframed(&pools, &[KeyframeInit::new(2, moving(2)), KeyframeInit::new(9, moving(9))], 12, &PropagationConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out/track.json");
    TrackManifest::from_track(&track).unwrap().write(&path).unwrap();
    let back = TrackManifest::read(&path).unwrap().to_track().unwrap();
    assert_eq!(back, track);
    assert_eq!(back.drifted_frames(), vec![6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn keyframed_fill_invariants(
        n in 2usize..40,
        picks in prop::collection::btree_set(0usize..40, 1..5),
    ) {
        let pools = moving_pools(n);
        let frames: Vec<usize> = picks.into_iter().filter(|&f| f < n).collect();
        prop_assume!(!frames.is_empty());
        let inits: Vec<_> = frames.iter().map(|&f| KeyframeInit::new(f, square(f % 40, 0, 3))).collect();
        let cfg = PropagationConfig::default();
        let t = propagate_keyframed(&pools, &inits, n, &cfg).unwrap();
        prop_assert_eq!(t.len(), n);
        for (i, f) in t.frames.iter().enumerate() {
            prop_assert_eq!(f.frame, i);
            prop_assert_eq!(f.keyframe, frames.contains(&i));
        }
        for init in &inits {
            prop_assert_eq!(&t.frames[init.frame].mask, &init.mask);
        }
        prop_assert_eq!(&t, &propagate_keyframed(&pools, &inits, n, &cfg).unwrap());
    }

    #[test]
    fn injected_gt_gives_perfect_track(n in 2usize..36, start in 0usize..36) {
        let start = start % n;
        let pools = moving_pools(n);
        let t = propagate_keyframed(&pools, &[KeyframeInit::new(start, moving(start))], n, &PropagationConfig::default()).unwrap();
        for f in &t.frames {
            prop_assert_eq!(iou(&f.mask, &moving(f.frame)).unwrap(), 1.0);
        }
    }
}
