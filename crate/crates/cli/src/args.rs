use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "clickcarve",
    version,
    about = "Proposal carving by boundary clicks: datasets, simulated annotators, propagation, reports and the annotation server"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, env = "CLICKCARVE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a data root and validate every proposal manifest.
    Ingest(IngestArgs),
    /// Write synthetic videos: ground-truth masks and frame images.
    SynthVideo(SynthVideoArgs),
    /// Write synthetic proposal pools around existing ground truth.
    Synth(SynthArgs),
    /// Run simulated clickers over annotated objects.
    Simulate(SimulateArgs),
    /// Initialize keyframes with a simulated clicker and propagate tracks.
    Propagate(PropagateArgs),
    /// Summarize simulation traces and tracks into a report.
    Eval(EvalArgs),
    /// Run the annotation HTTP server.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IngestFlags {
    /// Contour dilation radius in pixels.
    #[arg(long, env = "CLICKCARVE_RADIUS")]
    pub radius: Option<u32>,
    /// Min-max rescale out-of-range objectness instead of rejecting the manifest.
    #[arg(long)]
    pub normalize: bool,
    /// Drop proposals whose mask duplicates an earlier one.
    #[arg(long)]
    pub dedup: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Dataset root laid out as {video}/{frames,proposals,gt}/...
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    #[command(flatten)]
    pub ingest: IngestFlags,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthVideoArgs {
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    /// Video names to write (repeatable).
    #[arg(long = "video")]
    pub videos: Vec<String>,
    /// Write this many videos named `<prefix>NNN` instead.
    #[arg(long, conflicts_with = "videos")]
    pub count: Option<usize>,
    #[arg(long, default_value = "synth")]
    pub prefix: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub objects: Option<usize>,
    /// Maximum per-frame displacement along each axis.
    #[arg(long)]
    pub max_speed: Option<i64>,
    /// Skip frame images, write masks only.
    #[arg(long)]
    pub no_images: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    /// Restrict to these videos (repeatable); default is every video.
    #[arg(long = "video")]
    pub videos: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Near-duplicates of each object.
    #[arg(long)]
    pub near: Option<usize>,
    /// Partial covers of each object.
    #[arg(long)]
    pub partial: Option<usize>,
    /// Distractors per object.
    #[arg(long)]
    pub distractor: Option<usize>,
    /// Share of distractors that are fragments inside the object.
    #[arg(long)]
    pub fragment_fraction: Option<f64>,
    #[arg(long)]
    pub radius: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    #[command(flatten)]
    pub ingest: IngestFlags,
    /// Output directory for run.json and traces.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "video")]
    pub videos: Vec<String>,
    #[arg(long = "object")]
    pub objects: Vec<String>,
    /// Comma-separated policies: interior, uniform, submod, active, or `all`.
    #[arg(long)]
    pub policies: Option<String>,
    /// Seeds as `a..b` (half-open) or a comma-separated list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Annotated frames to run on: `all`, `first`, or a comma-separated list.
    #[arg(long)]
    pub frames: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Stopping margin in IoU (0.05 = five points).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    #[command(flatten)]
    pub ingest: IngestFlags,
    /// Output directory for run.json, tracks.jsonl and track manifests.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "video")]
    pub videos: Vec<String>,
    #[arg(long = "object")]
    pub objects: Vec<String>,
    /// Keyframe every N frames.
    #[arg(long)]
    pub cadence: Option<usize>,
    /// Clicker that initializes keyframes.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub drift_floor: Option<f64>,
    /// JSON list of explicit keyframes `{video, object, frame, proposal_id | rle}`
    /// used instead of simulated initialization.
    #[arg(long)]
    pub inits: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Simulation output directories or traces.jsonl files (repeatable).
    #[arg(long = "traces")]
    pub traces: Vec<PathBuf>,
    /// Propagation output directories or tracks.jsonl files (repeatable).
    #[arg(long = "tracks")]
    pub tracks: Vec<PathBuf>,
    /// Append published rows for a dataset: segtrack-v2, vsb100 or ivideoseg.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub seconds_per_click: Option<f64>,
    /// Directory for report.json, rows.csv, points.csv and summary.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CLICKCARVE_DATA_ROOT")]
    pub data_root: PathBuf,
    #[command(flatten)]
    pub ingest: IngestFlags,
    #[arg(long, env = "CLICKCARVE_HOST")]
    pub host: Option<IpAddr>,
    #[arg(long, env = "CLICKCARVE_PORT")]
    pub port: Option<u16>,
    #[arg(long, env = "CLICKCARVE_K")]
    pub k: Option<usize>,
    #[arg(long, env = "CLICKCARVE_BUDGET")]
    pub budget: Option<usize>,
    /// Keep a replayable log of mutating requests at GET /log.
    #[arg(long, env = "CLICKCARVE_RECORD")]
    pub record: bool,
}
