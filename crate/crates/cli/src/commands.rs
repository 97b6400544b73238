use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clickcarve_core::catalog::{Catalog, VideoEntry};
use clickcarve_core::dataset::{write_synthetic_pools, write_synthetic_video};
use clickcarve_core::eval::{summarize, write_points_csv, write_rows_csv, EvalReport, EvalRow, TimeModel};
use clickcarve_core::mask::{iou, rle_decode, Pixel};
use clickcarve_core::propagation::{
    keyframe_schedule, propagate_keyframed, KeyframeInit, PropagationConfig, TrackManifest,
};
use clickcarve_core::proposals::{FramePools, IngestOptions};
use clickcarve_core::sim::{objectness_baseline, simulate, Policy, SimConfig, StopCause};
use clickcarve_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::config::{fingerprint, parse_policies, parse_seeds, FileConfig, FrameSelection};

/// One line of `traces.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub fingerprint: String,
    pub video: String,
    pub object: String,
    pub frame: usize,
    /// A clicker policy, or `objectness` for the zero-click baseline.
    pub policy: String,
    pub seed: Option<u64>,
    pub clicks: Vec<Pixel>,
    pub clicks_used: usize,
    pub selected: u32,
    pub achieved_iou: f64,
    pub best_iou: f64,
    pub stopped_by: Option<StopCause>,
}

/// One line of `tracks.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub fingerprint: String,
    pub video: String,
    pub object: String,
    /// Keyframe initializer: a policy name or `given`.
    pub policy: String,
    pub seed: Option<u64>,
    pub frames: usize,
    pub keyframes: Vec<usize>,
    pub keyframe_clicks: usize,
    pub keyframe_iou: Option<f64>,
    pub track_iou: Option<f64>,
    pub drifted: Vec<usize>,
    /// Track manifest path, relative to the output directory.
    pub manifest: String,
}

/// Explicit keyframe for `propagate --inits`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub video: String,
    pub object: String,
    pub frame: usize,
    #[serde(default)]
    pub proposal_id: Option<u32>,
    /// Base64 varint RLE of a mask.
    #[serde(default)]
    pub rle: Option<String>,
}

#[derive(Serialize)]
struct RunFile<'a, T: Serialize> {
    command: &'a str,
    fingerprint: &'a str,
    config: &'a T,
    records: usize,
}

fn write_run_file<T: Serialize>(out: &Path, command: &str, fp: &str, config: &T, records: usize) -> Result<()> {
    let run = RunFile {
        command,
        fingerprint: fp,
        config,
        records,
    };
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    write_file(&out.join("run.json"), text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// A directory argument means its conventional file.
fn resolve_input(p: &Path, file: &str) -> PathBuf {
    if p.is_dir() {
        p.join(file)
    } else {
        p.to_path_buf()
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))
}

fn select_videos<'a>(catalog: &'a Catalog, names: &[String]) -> Result<Vec<&'a VideoEntry>> {
    if names.is_empty() {
        return Ok(catalog.videos.values().collect());
    }
    names.iter().map(|n| catalog.video(n)).collect()
}

fn selected_objects<'a>(v: &'a VideoEntry, names: &[String]) -> Vec<&'a String> {
    v.objects.keys().filter(|o| names.is_empty() || names.contains(o)).collect()
}

pub fn ingest(cfg: &FileConfig, a: &IngestArgs) -> Result<()> {
    let opts = cfg.ingest_with(&a.ingest);
    let catalog = Catalog::scan(&a.data_root)?;
    let report = catalog.validate(&opts)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!(
        "{:<20} {:>7} {:>6} {:>9} {:>8} {:>10} {:>9}",
        "video", "frames", "pools", "missing", "objects", "gt_frames", "proposals"
    );
    for v in &report.videos {
        println!(
            "{:<20} {:>7} {:>6} {:>9} {:>8} {:>10} {:>9}",
            v.name,
            v.frames,
            v.pools,
            v.missing_pools.len(),
            v.objects,
            v.gt_frames,
            v.proposals
        );
    }
    Ok(())
}

pub fn synth_video(cfg: &FileConfig, a: &SynthVideoArgs) -> Result<()> {
    let mut spec = cfg.video.clone();
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.height {
        spec.height = v;
    }
    if let Some(v) = a.frames {
        spec.frames = v;
    }
    if let Some(v) = a.objects {
        spec.objects = v;
    }
    if let Some(v) = a.max_speed {
        spec.max_speed = v;
    }
    if a.no_images {
        spec.images = false;
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let names: Vec<String> = match a.count {
        Some(n) => (0..n).map(|i| format!("{}{i:03}", a.prefix)).collect(),
        None if a.videos.is_empty() => vec!["synthetic".into()],
        None => a.videos.clone(),
    };
    names
        .par_iter()
        .try_for_each(|name| write_synthetic_video(&a.data_root, name, &spec, seed))?;
    println!("wrote {} video(s) to {} (seed {seed})", names.len(), a.data_root.display());
    Ok(())
}

pub fn synth(cfg: &FileConfig, a: &SynthArgs) -> Result<()> {
    let mut config = cfg.synth.clone();
    if let Some(v) = a.near {
        config.near = v;
    }
    if let Some(v) = a.partial {
        config.partial = v;
    }
    if let Some(v) = a.distractor {
        config.distractor = v;
    }
    if let Some(v) = a.fragment_fraction {
        config.fragment_fraction = v;
    }
    if let Some(v) = a.radius {
        config.dilation_radius = v;
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let catalog = Catalog::scan(&a.data_root)?;
    let videos = select_videos(&catalog, &a.videos)?;
    let written: Vec<usize> = videos
        .par_iter()
        .map(|v| write_synthetic_pools(&catalog, &v.name, &config, seed))
        .collect::<Result<_>>()?;
    println!(
        "wrote {} pool manifest(s) for {} video(s) (seed {seed})",
        written.iter().sum::<usize>(),
        videos.len()
    );
    Ok(())
}

/// Everything that determines simulation output.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatePlan {
    pub videos: Vec<String>,
    pub objects: Vec<String>,
    pub policies: Vec<Policy>,
    pub seeds: Vec<u64>,
    pub frames: FrameSelection,
    pub budget: usize,
    pub k: usize,
    pub stop_margin: f64,
    pub ingest: IngestOptions,
}

struct Unit {
    video: String,
    object: String,
    frame: usize,
}

fn run_unit(catalog: &Catalog, plan: &SimulatePlan, fp: &str, u: &Unit) -> Result<Vec<TraceRecord>> {
    let pool = Arc::new(catalog.load_pool(&u.video, u.frame, &plan.ingest)?);
    let gt = catalog.load_gt(&u.video, &u.object, u.frame)?;
    let best_iou = clickcarve_core::sim::GtOverlaps::new(&pool, &gt)?.best;
    let (sel, sel_iou) = objectness_baseline(&pool, &gt, plan.k)?;
    let record = |policy: String, seed, clicks, selected, achieved_iou, stopped_by| TraceRecord {
        fingerprint: fp.to_string(),
        video: u.video.clone(),
        object: u.object.clone(),
        frame: u.frame,
        policy,
        seed,
        clicks_used: Vec::len(&clicks),
        clicks,
        selected,
        achieved_iou,
        best_iou,
        stopped_by,
    };
    let mut out = vec![record("objectness".into(), None, Vec::new(), sel, sel_iou, None)];
    let runs: Vec<(Policy, u64)> = plan
        .policies
        .iter()
        .flat_map(|&p| plan.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let traces: Vec<_> = runs
        .par_iter()
        .map(|&(policy, seed)| {
            let config = SimConfig {
                budget: plan.budget,
                k: plan.k,
                stop_margin: plan.stop_margin,
                seed,
                policy,
            };
            simulate(&gt, pool.clone(), &config)
        })
        .collect::<Result<_>>()?;
    for t in traces {
        out.push(record(
            t.policy.to_string(),
            Some(t.seed),
            t.clicks,
            t.selected,
            t.achieved_iou,
            Some(t.stopped_by),
        ));
    }
    Ok(out)
}

pub fn simulate_cmd(cfg: &FileConfig, a: &SimulateArgs) -> Result<()> {
    let s = &cfg.simulate;
    let plan = SimulatePlan {
        videos: a.videos.clone(),
        objects: a.objects.clone(),
        policies: a.policies.as_deref().map(parse_policies).transpose()?.unwrap_or(s.policies.clone()),
        seeds: a.seeds.as_deref().map(parse_seeds).transpose()?.unwrap_or(s.seeds.clone()),
        frames: a.frames.as_deref().map(str::parse).transpose()?.unwrap_or(s.frames.clone()),
        budget: a.budget.unwrap_or(s.budget),
        k: a.k.unwrap_or(s.k),
        stop_margin: a.margin.unwrap_or(s.stop_margin),
        ingest: cfg.ingest_with(&a.ingest),
    };
    if plan.policies.is_empty() || plan.seeds.is_empty() {
        return Err(Error::invalid("need at least one policy and one seed"));
    }
    SimConfig {
        budget: plan.budget,
        k: plan.k,
        stop_margin: plan.stop_margin,
        seed: 0,
        policy: plan.policies[0],
    }
    .validate()?;
    let fp = fingerprint("simulate", &plan);
    let catalog = Catalog::scan(&a.data_root)?;

    let mut units = Vec::new();
    for v in select_videos(&catalog, &plan.videos)? {
        for obj in selected_objects(v, &plan.objects) {
            let frames = plan.frames.pick(v.objects[obj].iter().copied().filter(|f| v.pool_frames.contains(f)));
            if frames.is_empty() {
                eprintln!("warning: {}/{obj} has no annotated frame with a pool", v.name);
            }
            units.extend(frames.into_iter().map(|frame| Unit {
                video: v.name.clone(),
                object: obj.clone(),
                frame,
            }));
        }
    }
    if units.is_empty() {
        return Err(Error::invalid("nothing to simulate: no annotated frame with a pool matches the selection"));
    }

    let records: Vec<TraceRecord> = worker_pool(a.workers)?.install(|| {
        units
            .par_iter()
            .map(|u| run_unit(&catalog, &plan, &fp, u))
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    write_jsonl(&a.out.join("traces.jsonl"), &records)?;
    write_run_file(&a.out, "simulate", &fp, &plan, records.len())?;
    println!(
        "wrote {} trace(s) for {} frame(s) to {} (fingerprint {fp})",
        records.len(),
        units.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagatePlan {
    pub videos: Vec<String>,
    pub objects: Vec<String>,
    pub cadence: usize,
    pub policy: Policy,
    pub seed: u64,
    pub budget: usize,
    pub k: usize,
    pub stop_margin: f64,
    pub drift_floor: f64,
    /// Content of the `--inits` file, when given.
    pub inits: Option<serde_json::Value>,
    pub ingest: IngestOptions,
}

struct Inits {
    inits: Vec<KeyframeInit>,
    clicks: usize,
    ious: Vec<f64>,
}

/// Simulated initialization on the first annotated frame of each cadence window.
fn simulated_inits<P: FramePools>(
    catalog: &Catalog,
    pools: &P,
    plan: &PropagatePlan,
    v: &VideoEntry,
    object: &str,
) -> Result<Inits> {
    let gt_frames = &v.objects[object];
    let n = v.frame_count();
    let schedule = keyframe_schedule(n, plan.cadence)?;
    let mut out = Inits {
        inits: Vec::new(),
        clicks: 0,
        ious: Vec::new(),
    };
    for (i, &start) in schedule.iter().enumerate() {
        let end = schedule.get(i + 1).copied().unwrap_or(n);
        let Some(&f) = gt_frames.range(start..end).next() else {
            continue;
        };
        let pool = pools.pool(f)?;
        let gt = catalog.load_gt(&v.name, object, f)?;
        let config = SimConfig {
            budget: plan.budget,
            k: plan.k,
            stop_margin: plan.stop_margin,
            seed: plan.seed,
            policy: plan.policy,
        };
        let trace = simulate(&gt, pool.clone(), &config)?;
        let mask = pool.get(trace.selected).ok_or(Error::UnknownProposal(trace.selected))?.mask.clone();
        out.clicks += trace.clicks_used;
        out.ious.push(trace.achieved_iou);
        out.inits.push(KeyframeInit::new(f, mask).with_proposal(trace.selected));
    }
    Ok(out)
}

fn given_inits<P: FramePools>(
    catalog: &Catalog,
    pools: &P,
    specs: &[InitSpec],
    v: &VideoEntry,
    object: &str,
) -> Result<Inits> {
    let mut out = Inits {
        inits: Vec::new(),
        clicks: 0,
        ious: Vec::new(),
    };
    for s in specs.iter().filter(|s| s.video == v.name && s.object == object) {
        let pool = pools.pool(s.frame)?;
        let init = match (s.proposal_id, &s.rle) {
            (Some(id), None) => {
                let p = pool.get(id).ok_or(Error::UnknownProposal(id))?;
                KeyframeInit::new(s.frame, p.mask.clone()).with_proposal(id)
            }
            (None, Some(rle)) => {
                let bytes = base64_decode(rle)?;
                let (w, h) = (pool.width(), pool.height());
                KeyframeInit::new(s.frame, rle_decode(&bytes, w, h)?)
            }
            _ => {
                return Err(Error::invalid(format!(
                    "keyframe {}/{object}/{} needs exactly one of proposal_id and rle",
                    v.name, s.frame
                )))
            }
        };
        if let Ok(gt) = catalog.load_gt(&v.name, object, s.frame) {
            out.ious.push(iou(&init.mask, &gt)?);
        }
        out.inits.push(init);
    }
    Ok(out)
}

fn base64_decode(s: &str) -> Result<Vec<u8>> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(|e| Error::invalid(format!("keyframe rle is not base64: {e}")))
}

fn propagate_object(
    catalog: &Catalog,
    plan: &PropagatePlan,
    specs: Option<&[InitSpec]>,
    fp: &str,
    out_dir: &Path,
    v: &VideoEntry,
    object: &str,
) -> Result<Option<TrackSummary>> {
    let pools = catalog.pools(&v.name, plan.ingest.clone())?;
    let inits = match specs {
        Some(specs) => given_inits(catalog, &pools, specs, v, object)?,
        None => simulated_inits(catalog, &pools, plan, v, object)?,
    };
    if inits.inits.is_empty() {
        eprintln!("warning: {}/{object} has no keyframe, skipped", v.name);
        return Ok(None);
    }
    let n = v.frame_count();
    let track = propagate_keyframed(&pools, &inits.inits, n, &PropagationConfig { drift_floor: plan.drift_floor })?;
    let mut gts = catalog.load_gt_track(&v.name, object)?;
    gts.retain(|&f, _| f < n);
    let track_iou = if gts.is_empty() {
        None
    } else {
        Some(clickcarve_core::eval::track_eval(&track, &gts)?)
    };
    let mut manifest = TrackManifest::from_track(&track)?;
    manifest.video = Some(v.name.clone());
    manifest.object = Some(object.to_string());
    let rel = format!("{}/{object}.json", v.name);
    manifest.write(&out_dir.join(&rel))?;
    let keyframe_iou = (!inits.ious.is_empty()).then(|| inits.ious.iter().sum::<f64>() / inits.ious.len() as f64);
    Ok(Some(TrackSummary {
        fingerprint: fp.to_string(),
        video: v.name.clone(),
        object: object.to_string(),
        policy: if specs.is_some() { "given".into() } else { plan.policy.to_string() },
        seed: specs.is_none().then_some(plan.seed),
        frames: n,
        keyframes: track.keyframes.iter().copied().collect(),
        keyframe_clicks: inits.clicks,
        keyframe_iou,
        track_iou,
        drifted: track.drifted_frames(),
        manifest: rel,
    }))
}

pub fn propagate_cmd(cfg: &FileConfig, a: &PropagateArgs) -> Result<()> {
    let p = &cfg.propagate;
    let s = &cfg.simulate;
    let (specs, inits_value) = match &a.inits {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let specs: Vec<InitSpec> = serde_json::from_value(value.clone())?;
            (Some(specs), Some(value))
        }
        None => (None, None),
    };
    let plan = PropagatePlan {
        videos: a.videos.clone(),
        objects: a.objects.clone(),
        cadence: a.cadence.unwrap_or(p.cadence),
        policy: a.policy.as_deref().map(str::parse).transpose()?.unwrap_or(p.policy),
        seed: a.seed.unwrap_or(p.seed),
        budget: a.budget.unwrap_or(s.budget),
        k: a.k.unwrap_or(s.k),
        stop_margin: a.margin.unwrap_or(s.stop_margin),
        drift_floor: a.drift_floor.unwrap_or(p.drift_floor),
        inits: inits_value,
        ingest: cfg.ingest_with(&a.ingest),
    };
    if plan.cadence == 0 {
        return Err(Error::invalid("cadence must be at least 1"));
    }
    let fp = fingerprint("propagate", &plan);
    let catalog = Catalog::scan(&a.data_root)?;
    let mut jobs = Vec::new();
    for v in select_videos(&catalog, &plan.videos)? {
        for obj in selected_objects(v, &plan.objects) {
            jobs.push((v, obj.as_str()));
        }
    }
    if jobs.is_empty() {
        return Err(Error::invalid("nothing to propagate: no annotated object matches the selection"));
    }
    let summaries: Vec<TrackSummary> = worker_pool(a.workers)?
        .install(|| {
            jobs.par_iter()
                .map(|&(v, obj)| propagate_object(&catalog, &plan, specs.as_deref(), &fp, &a.out, v, obj))
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
    write_jsonl(&a.out.join("tracks.jsonl"), &summaries)?;
    write_run_file(&a.out, "propagate", &fp, &plan, summaries.len())?;
    for t in &summaries {
        let iou = t.track_iou.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
        println!(
            "{}/{}: {} frames, keyframes {:?}, drifted {}, track IoU {iou}",
            t.video,
            t.object,
            t.frames,
            t.keyframes,
            t.drifted.len()
        );
    }
    println!("wrote {} track(s) to {} (fingerprint {fp})", summaries.len(), a.out.display());
    Ok(())
}

pub fn trace_row(t: &TraceRecord, time: &TimeModel) -> EvalRow {
    EvalRow {
        video: t.video.clone(),
        object: t.object.clone(),
        policy: t.policy.clone(),
        seed: t.seed,
        frame: t.frame,
        clicks: t.clicks_used,
        modeled_time_s: time.modeled_time(t.clicks_used),
        wall_time_s: None,
        selected_iou: t.achieved_iou,
        best_iou: Some(t.best_iou),
        track_iou: None,
        stopped_by: t.stopped_by.map(|s| s.as_str().to_string()),
    }
}

/// Attach each track's IoU to the rows of the run that initialized it; a
/// track with no such rows becomes a row of its own.
pub fn merge_tracks(rows: &mut Vec<EvalRow>, tracks: &[TrackSummary], time: &TimeModel) {
    for t in tracks {
        let Some(track_iou) = t.track_iou else {
            continue;
        };
        let mut matched = false;
        for r in rows.iter_mut() {
            if r.video == t.video && r.object == t.object && r.policy == t.policy && r.seed == t.seed {
                r.track_iou = Some(track_iou);
                matched = true;
            }
        }
        if !matched {
            rows.push(EvalRow {
                video: t.video.clone(),
                object: t.object.clone(),
                policy: t.policy.clone(),
                seed: t.seed,
                frame: t.keyframes.first().copied().unwrap_or(0),
                clicks: t.keyframe_clicks,
                modeled_time_s: time.modeled_time(t.keyframe_clicks),
                wall_time_s: None,
                selected_iou: t.keyframe_iou.unwrap_or(track_iou),
                best_iou: None,
                track_iou: Some(track_iou),
                stopped_by: None,
            });
        }
    }
}

#[derive(Serialize)]
struct EvalPlan<'a> {
    inputs: Vec<&'a str>,
    seconds_per_click: f64,
    reference: Option<&'a str>,
}

pub fn eval_cmd(cfg: &FileConfig, a: &EvalArgs) -> Result<()> {
    if a.traces.is_empty() && a.tracks.is_empty() {
        return Err(Error::invalid("give at least one --traces or --tracks input"));
    }
    let time = TimeModel {
        seconds_per_click: a.seconds_per_click.unwrap_or(cfg.eval.seconds_per_click),
    };
    if !(time.seconds_per_click.is_finite() && time.seconds_per_click >= 0.0) {
        return Err(Error::invalid("seconds per click must be a nonnegative number"));
    }
    let reference = a.reference.clone().or_else(|| cfg.eval.reference.clone());
    let mut traces: Vec<TraceRecord> = Vec::new();
    for p in &a.traces {
        traces.extend(read_jsonl::<TraceRecord>(&resolve_input(p, "traces.jsonl"))?);
    }
    let mut tracks: Vec<TrackSummary> = Vec::new();
    for p in &a.tracks {
        tracks.extend(read_jsonl::<TrackSummary>(&resolve_input(p, "tracks.jsonl"))?);
    }
    let mut rows: Vec<EvalRow> = traces.iter().map(|t| trace_row(t, &time)).collect();
    merge_tracks(&mut rows, &tracks, &time);

    let mut inputs: Vec<&str> = traces
        .iter()
        .map(|t| t.fingerprint.as_str())
        .chain(tracks.iter().map(|t| t.fingerprint.as_str()))
        .collect();
    inputs.sort_unstable();
    inputs.dedup();
    let fp = fingerprint(
        "eval",
        &EvalPlan {
            inputs,
            seconds_per_click: time.seconds_per_click,
            reference: reference.as_deref(),
        },
    );
    let mut report = EvalReport::new(rows, time, Some(fp.clone()))?;
    if let Some(d) = &reference {
        report.summary = report.summary.clone().with_reference(d)?;
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        report.write(&out.join("report.json"))?;
        let mut csv = Vec::new();
        write_rows_csv(&report.rows, &mut csv)?;
        write_file(&out.join("rows.csv"), &csv)?;
        let mut pts = Vec::new();
        write_points_csv(&report.summary.points, &mut pts)?;
        write_file(&out.join("points.csv"), &pts)?;
        write_file(&out.join("summary.txt"), report.summary.to_text().as_bytes())?;
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let written = match a.format {
        Format::Text => w.write_all(format!("fingerprint {fp}\n{}", report.summary.to_text()).as_bytes()),
        Format::Json => w.write_all((serde_json::to_string_pretty(&report.summary)? + "\n").as_bytes()),
        Format::Csv => {
            write_rows_csv(&report.rows, &mut w)?;
            Ok(())
        }
    };
    written.map_err(|e| Error::io("<stdout>", e))
}

pub fn serve_cmd(cfg: &FileConfig, a: &ServeArgs) -> Result<()> {
    let s = &cfg.serve;
    let config = clickcarve_server::ServerConfig {
        k: a.k.unwrap_or(s.k),
        budget: a.budget.unwrap_or(s.budget),
        ingest: cfg.ingest_with(&a.ingest),
        record_requests: a.record || s.record,
    };
    if config.k == 0 || config.budget == 0 {
        return Err(Error::invalid("k and budget must be at least 1"));
    }
    let catalog = Catalog::scan(&a.data_root)?;
    let addr = std::net::SocketAddr::new(a.host.unwrap_or(s.host), a.port.unwrap_or(s.port));
    let state = clickcarve_server::AppState::new(catalog, config);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(clickcarve_server::serve(addr, state))
        .map_err(|e| Error::io(addr.to_string(), e))
}

/// Summarize without touching the filesystem, for tests and callers that
/// already hold the records.
pub fn summarize_traces(traces: &[TraceRecord], time: &TimeModel) -> Result<clickcarve_core::eval::Summary> {
    let rows: Vec<EvalRow> = traces.iter().map(|t| trace_row(t, time)).collect();
    summarize(&rows)
}

pub fn group_counts(traces: &[TraceRecord]) -> BTreeMap<(String, String, String), usize> {
    let mut m = BTreeMap::new();
    for t in traces {
        *m.entry((t.video.clone(), t.object.clone(), t.policy.clone())).or_insert(0) += 1;
    }
    m
}
