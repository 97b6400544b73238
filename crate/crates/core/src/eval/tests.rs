use super::*;
use crate::mask::Pixel;
use crate::propagation::{TrackFrame, VideoTrack};
use crate::proposals::{ProposalInput, Source};
use crate::sim::{Policy, StopCause};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn row(policy: &str, clicks: usize, iou: f64) -> EvalRow {
    EvalRow {
        video: "v".into(),
        object: "o".into(),
        policy: policy.into(),
        seed: Some(1),
        frame: 0,
        clicks,
        modeled_time_s: TimeModel::default().modeled_time(clicks),
        wall_time_s: None,
        selected_iou: iou,
        best_iou: None,
        track_iou: None,
        stopped_by: None,
    }
}

#[test]
fn modeled_time_is_exact_decimal() {
    let t = TimeModel::default();
    assert_eq!(t.modeled_time(3), 7.2);
    assert_eq!(t.modeled_time(0), 0.0);
    assert_eq!(t.modeled_time(10), 24.0);
    for n in 0..=1000usize {
        let tenths = n * 24;
        let literal: f64 = format!("{}.{}", tenths / 10, tenths % 10).parse().unwrap();
        assert_eq!(t.modeled_time(n), literal, "{n} clicks");
    }
    let custom = TimeModel { seconds_per_click: 3.8 };
    assert_eq!(custom.modeled_time(5), 19.0);
}

fn square(x: usize, s: usize) -> BinaryMask {
    BinaryMask::rect(40, 30, x, 5, s, s).unwrap()
}

fn trace(selected: u32, clicks: usize, stopped_by: StopCause) -> SimTrace {
    SimTrace {
        policy: Policy::Active,
        seed: 4,
        clicks: (0..clicks).map(|i| Pixel::new(i as u32, 0)).collect(),
        clicks_used: clicks,
        selected,
        achieved_iou: 0.0,
        best_iou: 1.0,
        stopped_by,
    }
}

#[test]
fn frame_rows() {
    let gt = square(4, 10);
    let pool = ProposalPool::build(
        0,
        40,
        30,
        5,
        vec![
            ProposalInput::new(square(20, 6), 0.9, Source::Static),
            ProposalInput::new(gt.clone(), 0.5, Source::Static),
        ],
    )
    .unwrap();
    let key = RowKey { video: "v", object: "o", frame: 0 };
    let r = frame_eval(key, &trace(1, 3, StopCause::MarginReached), &pool, &gt, &TimeModel::default()).unwrap();
    assert_eq!(r.selected_iou, 1.0);
    assert_eq!(r.modeled_time_s, 7.2);
    assert_eq!(r.policy, "active");
    assert_eq!(r.stopped_by.as_deref(), Some("margin_reached"));
    let r = frame_eval(key, &trace(0, 10, StopCause::BudgetExhausted), &pool, &gt, &TimeModel::default()).unwrap();
    assert_eq!(r.stopped_by.as_deref(), Some("budget_exhausted"));
    assert_eq!(r.selected_iou, 0.0);
    assert!(frame_eval(key, &trace(9, 1, StopCause::MarginReached), &pool, &gt, &TimeModel::default()).is_err());

    let r = session_eval(key, 2, &gt, &gt, Some(6.5), &TimeModel::default()).unwrap();
    assert_eq!((r.selected_iou, r.modeled_time_s, r.wall_time_s), (1.0, 4.8, Some(6.5)));
}

fn track_of(masks: Vec<BinaryMask>) -> VideoTrack {
    VideoTrack {
        frames: masks
            .into_iter()
            .enumerate()
            .map(|(i, mask)| TrackFrame {
                frame: i,
                proposal: None,
                mask,
                link_iou: None,
                drifted: false,
                keyframe: i == 0,
            })
            .collect(),
        keyframes: BTreeSet::from([0]),
    }
}

#[test]
fn track_scores() {
    let gt = square(0, 10);
    let track = track_of(vec![gt.clone(); 25]);
    let gts: BTreeMap<usize, BinaryMask> = [(0, gt.clone()), (20, gt.clone())].into();
    assert_eq!(track_eval(&track, &gts).unwrap(), 1.0);

    // 90 of 100 and 70 of 100 pixels
    let m90 = BinaryMask::rect(40, 30, 0, 5, 10, 9).unwrap();
    let m70 = BinaryMask::rect(40, 30, 0, 5, 10, 7).unwrap();
    let mut masks = vec![m90.clone(); 25];
    masks[20] = m70;
    let s = track_eval(&track_of(masks), &gts).unwrap();
    assert!((s - 0.8).abs() < 1e-12);

    assert!(track_eval(&track, &BTreeMap::new()).is_err());
    let far: BTreeMap<usize, BinaryMask> = [(30, gt)].into();
    assert!(track_eval(&track, &far).is_err());
}

#[test]
fn summary_of_one_row() {
    let mut r = row("submod", 4, 0.75);
    r.track_iou = Some(0.6);
    r.wall_time_s = Some(12.0);
    let s = summarize(std::slice::from_ref(&r)).unwrap();
    assert_eq!(s.table.len(), 1);
    let t = &s.table[0];
    assert_eq!(t.mean_clicks, Some(4.0));
    assert_eq!(t.mean_modeled_time_s, Some(9.6));
    assert_eq!(t.mean_selected_iou, 0.75);
    assert_eq!(t.mean_track_iou, Some(0.6));
    assert_eq!(t.mean_wall_time_s, Some(12.0));
    assert_eq!(s.points, vec![CostPoint { policy: "submod".into(), modeled_time_s: 9.6, iou: 0.75 }]);
}

#[test]
fn summary_spreadsheet_case() {
    // interior: clicks 6, 8, 10 iou .5, .4, .6 -> 8, 19.2 s, .5
    // active:   clicks 1, 2, 3  iou .9, .8, .7 -> 2, 4.8 s, .8
    let rows = vec![
        row("active", 1, 0.9),
        row("interior", 6, 0.5),
        row("active", 2, 0.8),
        row("interior", 8, 0.4),
        row("interior", 10, 0.6),
        row("active", 3, 0.7),
    ];
    let s = summarize(&rows).unwrap();
    let names: Vec<_> = s.table.iter().map(|r| r.policy.as_str()).collect();
    assert_eq!(names, ["interior", "active"]);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    assert!(close(s.table[0].mean_clicks.unwrap(), 8.0));
    assert!(close(s.table[0].mean_modeled_time_s.unwrap(), 19.2));
    assert!(close(s.table[0].mean_selected_iou, 0.5));
    assert!(close(s.table[1].mean_clicks.unwrap(), 2.0));
    assert!(close(s.table[1].mean_modeled_time_s.unwrap(), 4.8));
    assert!(close(s.table[1].mean_selected_iou, 0.8));
    assert_eq!(s.table[1].mean_track_iou, None);
    assert!(summarize(&[]).is_err());
}

#[test]
fn published_rows() {
    let rows = reference_rows("segtrack-v2").unwrap();
    let human = rows.iter().find(|r| r.policy == "human").unwrap();
    assert_eq!(human.mean_clicks, Some(2.46));
    assert_eq!(human.mean_modeled_time_s, Some(9.37));
    assert!((human.mean_selected_iou - 0.7877).abs() < 1e-12);
    assert!(human.external);
    let interior = rows.iter().find(|r| r.policy == "interior").unwrap();
    assert_eq!(interior.mean_clicks, Some(6.29));
    let active = rows.iter().find(|r| r.policy == "active").unwrap();
    assert_eq!(active.mean_clicks, Some(3.34));
    assert!((active.mean_selected_iou - 0.7624).abs() < 1e-12);
    assert_eq!(reference_datasets(), ["segtrack-v2", "vsb100", "ivideoseg"]);
    assert!(reference_rows("davis").is_err());

    let s = summarize(&[row("active", 2, 0.9)]).unwrap().with_reference("vsb100").unwrap();
    assert_eq!(s.table.len(), 9);
    let text = s.to_text();
    assert!(text.contains("external:vsb100"));
    assert!(text.lines().nth(1).unwrap().contains("this run"));
}

fn arb_row() -> impl Strategy<Value = EvalRow> {
    (
        prop::sample::select(vec!["interior", "uniform", "submod", "active", "human", "bbox"]),
        0usize..11,
        0.0f64..=1.0,
        prop::option::of(0.0f64..=1.0),
        prop::option::of(0.0f64..100.0),
        prop::option::of(any::<u64>()),
        prop::option::of(prop::sample::select(vec!["margin_reached", "budget_exhausted"])),
    )
        .prop_map(|(p, clicks, iou, track, wall, seed, stop)| EvalRow {
            track_iou: track,
            wall_time_s: wall,
            seed,
            stopped_by: stop.map(String::from),
            best_iou: Some(iou),
            ..row(p, clicks, iou)
        })
}

proptest! {
    #[test]
    fn summary_matches_brute_force(rows in prop::collection::vec(arb_row(), 1..40)) {
        let s = summarize(&rows).unwrap();
        let total: usize = s.table.iter().map(|r| r.rows).sum();
        prop_assert_eq!(total, rows.len());
        for t in &s.table {
            let g: Vec<&EvalRow> = rows.iter().filter(|r| r.policy == t.policy).collect();
            let n = g.len() as f64;
            let clicks = g.iter().map(|r| r.clicks as f64).sum::<f64>() / n;
            let iou = g.iter().map(|r| r.selected_iou).sum::<f64>() / n;
            let tracks: Vec<f64> = g.iter().filter_map(|r| r.track_iou).collect();
            prop_assert!((t.mean_clicks.unwrap() - clicks).abs() < 1e-9);
            prop_assert!((t.mean_modeled_time_s.unwrap() - 2.4 * clicks).abs() < 1e-9);
            prop_assert!((t.mean_selected_iou - iou).abs() < 1e-9);
            match t.mean_track_iou {
                None => prop_assert!(tracks.is_empty()),
                Some(m) => prop_assert!((m - tracks.iter().sum::<f64>() / tracks.len() as f64).abs() < 1e-9),
            }
        }
    }

    #[test]
    fn reports_round_trip(rows in prop::collection::vec(arb_row(), 1..20)) {
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(&read_rows_csv(buf.as_slice()).unwrap(), &rows);

        let report = EvalReport::new(rows, TimeModel::default(), Some("abc".into())).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        prop_assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
    }
}
