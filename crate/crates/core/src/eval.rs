//! Per-object evaluation rows, policy summaries, and report files.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{iou, BinaryMask};
use crate::propagation::VideoTrack;
use crate::proposals::ProposalPool;
use crate::sim::SimTrace;

pub const SECONDS_PER_CLICK: f64 = 2.4;

/// Annotation time charged per click. Only clicks are counted; decision
/// time lives in the separate wall-time column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    pub seconds_per_click: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        TimeModel {
            seconds_per_click: SECONDS_PER_CLICK,
        }
    }
}

impl TimeModel {
    /// Computed in whole milliseconds so 3 clicks give exactly `7.2`.
    pub fn modeled_time(&self, clicks: usize) -> f64 {
        let ms = (self.seconds_per_click * 1000.0).round();
        clicks as f64 * ms / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub video: String,
    pub object: String,
    /// Clicker policy, `human`, or any other method label.
    pub policy: String,
    pub seed: Option<u64>,
    pub frame: usize,
    pub clicks: usize,
    pub modeled_time_s: f64,
    /// Interactive sessions only.
    pub wall_time_s: Option<f64>,
    pub selected_iou: f64,
    pub best_iou: Option<f64>,
    pub track_iou: Option<f64>,
    pub stopped_by: Option<String>,
}

/// Where an evaluated selection sits in its video.
#[derive(Debug, Clone, Copy)]
pub struct RowKey<'a> {
    pub video: &'a str,
    pub object: &'a str,
    pub frame: usize,
}

/// Row for one simulated run; the selected proposal is rescored against `gt`.
pub fn frame_eval(key: RowKey<'_>, trace: &SimTrace, pool: &ProposalPool, gt: &BinaryMask, time: &TimeModel) -> Result<EvalRow> {
    let selected = pool.get(trace.selected).ok_or(Error::UnknownProposal(trace.selected))?;
    Ok(EvalRow {
        video: key.video.to_string(),
        object: key.object.to_string(),
        policy: trace.policy.to_string(),
        seed: Some(trace.seed),
        frame: key.frame,
        clicks: trace.clicks_used,
        modeled_time_s: time.modeled_time(trace.clicks_used),
        wall_time_s: None,
        selected_iou: iou(&selected.mask, gt)?,
        best_iou: Some(trace.best_iou),
        track_iou: None,
        stopped_by: Some(trace.stopped_by.as_str().to_string()),
    })
}

/// Row for an interactive session that ended with `accepted`.
pub fn session_eval(
    key: RowKey<'_>,
    clicks: usize,
    accepted: &BinaryMask,
    gt: &BinaryMask,
    wall_time_s: Option<f64>,
    time: &TimeModel,
) -> Result<EvalRow> {
    Ok(EvalRow {
        video: key.video.to_string(),
        object: key.object.to_string(),
        policy: "human".into(),
        seed: None,
        frame: key.frame,
        clicks,
        modeled_time_s: time.modeled_time(clicks),
        wall_time_s,
        selected_iou: iou(accepted, gt)?,
        best_iou: None,
        track_iou: None,
        stopped_by: None,
    })
}

/// Mean IoU over the annotated frames only.
pub fn track_eval(track: &VideoTrack, gts: &BTreeMap<usize, BinaryMask>) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::invalid("track evaluation needs at least one ground-truth frame"));
    }
    let mut ious = Vec::with_capacity(gts.len());
    for (&f, gt) in gts {
        let m = track
            .mask(f)
            .ok_or_else(|| Error::invalid(format!("track of {} frames has no frame {f}", track.len())))?;
        ious.push(iou(m, gt)?);
    }
    Ok(crate::num::mean(&ious).expect("nonempty"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    /// Set for published reference rows.
    pub dataset: Option<String>,
    pub external: bool,
    pub rows: usize,
    pub mean_clicks: Option<f64>,
    pub mean_modeled_time_s: Option<f64>,
    pub mean_wall_time_s: Option<f64>,
    pub mean_selected_iou: f64,
    pub mean_track_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub policy: String,
    pub modeled_time_s: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub table: Vec<SummaryRow>,
    pub points: Vec<CostPoint>,
}

fn policy_order(p: &str) -> (usize, &str) {
    const KNOWN: [&str; 6] = ["objectness", "interior", "uniform", "submod", "active", "human"];
    (KNOWN.iter().position(|k| *k == p).unwrap_or(KNOWN.len()), p)
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values {
        n += 1;
        sum += v;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Group rows by policy and average every column. Optional columns average
/// over the rows that have them.
pub fn summarize(rows: &[EvalRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::invalid("nothing to summarize"));
    }
    let mut groups: BTreeMap<(usize, &str), Vec<&EvalRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(policy_order(&r.policy)).or_default().push(r);
    }
    let mut table = Vec::with_capacity(groups.len());
    let mut points = Vec::with_capacity(groups.len());
    for ((_, policy), g) in groups {
        let n = g.len() as f64;
        let row = SummaryRow {
            policy: policy.to_string(),
            dataset: None,
            external: false,
            rows: g.len(),
            mean_clicks: Some(g.iter().map(|r| r.clicks as f64).sum::<f64>() / n),
            mean_modeled_time_s: Some(g.iter().map(|r| r.modeled_time_s).sum::<f64>() / n),
            mean_wall_time_s: mean_of(g.iter().filter_map(|r| r.wall_time_s)),
            mean_selected_iou: g.iter().map(|r| r.selected_iou).sum::<f64>() / n,
            mean_track_iou: mean_of(g.iter().filter_map(|r| r.track_iou)),
        };
        points.push(CostPoint {
            policy: row.policy.clone(),
            modeled_time_s: row.mean_modeled_time_s.unwrap_or(0.0),
            iou: row.mean_selected_iou,
        });
        table.push(row);
    }
    Ok(Summary { table, points })
}

/// (dataset, method, clicks, seconds, IoU in percent)
type ReferenceRow = (&'static str, &'static str, Option<f64>, Option<f64>, f64);

/// Published proposal-selection results used as context rows.
const REFERENCE: &[ReferenceRow] = &[
    ("segtrack-v2", "objectness", Some(0.0), Some(0.0), 42.36),
    ("segtrack-v2", "interior", Some(6.29), Some(23.95), 52.79),
    ("segtrack-v2", "bbox", Some(2.0), Some(7.0), 67.51),
    ("segtrack-v2", "uniform", Some(4.46), Some(16.98), 75.8),
    ("segtrack-v2", "submod", Some(3.83), Some(14.58), 76.76),
    ("segtrack-v2", "active", Some(3.34), Some(12.72), 76.24),
    ("segtrack-v2", "human", Some(2.46), Some(9.37), 78.77),
    ("segtrack-v2", "bestprop", None, None, 80.74),
    ("vsb100", "objectness", Some(0.0), Some(0.0), 28.45),
    ("vsb100", "interior", Some(7.05), Some(30.11), 46.98),
    ("vsb100", "bbox", Some(2.0), Some(7.0), 58.98),
    ("vsb100", "uniform", Some(5.34), Some(22.81), 64.2),
    ("vsb100", "submod", Some(5.28), Some(22.55), 65.67),
    ("vsb100", "active", Some(5.23), Some(22.33), 66.91),
    ("vsb100", "human", Some(4.35), Some(18.58), 69.63),
    ("vsb100", "bestprop", None, None, 72.82),
    ("ivideoseg", "objectness", Some(0.0), Some(0.0), 50.69),
    ("ivideoseg", "interior", Some(5.02), Some(19.86), 72.54),
    ("ivideoseg", "bbox", Some(2.0), Some(7.0), 68.04),
    ("ivideoseg", "uniform", Some(3.84), Some(15.20), 77.57),
    ("ivideoseg", "submod", Some(3.29), Some(13.02), 77.84),
    ("ivideoseg", "active", Some(3.15), Some(12.47), 78.65),
    ("ivideoseg", "human", Some(2.84), Some(11.24), 78.24),
    ("ivideoseg", "bestprop", None, None, 81.34),
];

pub fn reference_datasets() -> Vec<&'static str> {
    let mut out: Vec<&str> = REFERENCE.iter().map(|r| r.0).collect();
    out.dedup();
    out
}

/// Published rows for one dataset, marked external. Their times are as
/// published and not derived from [`TimeModel`].
pub fn reference_rows(dataset: &str) -> Result<Vec<SummaryRow>> {
    let rows: Vec<SummaryRow> = REFERENCE
        .iter()
        .filter(|r| r.0 == dataset)
        .map(|&(d, m, clicks, time, iou)| SummaryRow {
            policy: m.to_string(),
            dataset: Some(d.to_string()),
            external: true,
            rows: 0,
            mean_clicks: clicks,
            mean_modeled_time_s: time,
            mean_wall_time_s: None,
            mean_selected_iou: iou / 100.0,
            mean_track_iou: None,
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "no reference rows for {dataset:?}; known: {}",
            reference_datasets().join(", ")
        )));
    }
    Ok(rows)
}

impl Summary {
    pub fn with_reference(mut self, dataset: &str) -> Result<Self> {
        self.table.extend(reference_rows(dataset)?);
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        let mut lines = vec![format!(
            "{:<12} {:>5} {:>7} {:>8} {:>8} {:>7} {:>9}  {}",
            "policy", "n", "clicks", "time_s", "wall_s", "IoU", "track_IoU", "source"
        )];
        for r in &self.table {
            let source = match (&r.dataset, r.external) {
                (Some(d), true) => format!("external:{d}"),
                _ => "this run".to_string(),
            };
            lines.push(format!(
                "{:<12} {:>5} {:>7} {:>8} {:>8} {:>7.2} {:>9}  {}",
                r.policy,
                if r.external { "-".to_string() } else { r.rows.to_string() },
                opt(r.mean_clicks, 2),
                opt(r.mean_modeled_time_s, 2),
                opt(r.mean_wall_time_s, 2),
                100.0 * r.mean_selected_iou,
                opt(r.mean_track_iou.map(|v| 100.0 * v), 2),
                source
            ));
        }
        lines.join("\n") + "\n"
    }
}

pub fn write_rows_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<EvalRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::invalid(format!("csv: {e}"))))
        .collect()
}

pub fn write_points_csv<W: Write>(points: &[CostPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(())
}

/// Everything an evaluation run writes, in one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: Option<String>,
    pub time_model: TimeModel,
    pub rows: Vec<EvalRow>,
    pub summary: Summary,
}

impl EvalReport {
    pub fn new(rows: Vec<EvalRow>, time_model: TimeModel, fingerprint: Option<String>) -> Result<Self> {
        let summary = summarize(&rows)?;
        Ok(EvalReport {
            fingerprint,
            time_model,
            rows,
            summary,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests;
