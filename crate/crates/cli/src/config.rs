use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clickcarve_core::dataset::VideoSpec;
use clickcarve_core::eval::SECONDS_PER_CLICK;
use clickcarve_core::propagation::DEFAULT_DRIFT_FLOOR;
use clickcarve_core::proposals::{IngestOptions, SynthConfig};
use clickcarve_core::sim::{Policy, DEFAULT_STOP_MARGIN};
use clickcarve_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::IngestFlags;

/// Contents of the `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub video: VideoSpec,
    pub synth: SynthConfig,
    pub ingest: IngestOptions,
    pub simulate: SimulateSection,
    pub propagate: PropagateSection,
    pub eval: EvalSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub policies: Vec<Policy>,
    pub seeds: Vec<u64>,
    pub frames: FrameSelection,
    pub budget: usize,
    pub k: usize,
    pub stop_margin: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            policies: Policy::ALL.to_vec(),
            seeds: vec![0],
            frames: FrameSelection::All,
            budget: clickcarve_core::carving::DEFAULT_BUDGET,
            k: clickcarve_core::carving::DEFAULT_TOP_K,
            stop_margin: DEFAULT_STOP_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateSection {
    pub cadence: usize,
    pub policy: Policy,
    pub seed: u64,
    pub drift_floor: f64,
}

impl Default for PropagateSection {
    fn default() -> Self {
        PropagateSection {
            cadence: 100,
            policy: Policy::Active,
            seed: 0,
            drift_floor: DEFAULT_DRIFT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub seconds_per_click: f64,
    pub reference: Option<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            seconds_per_click: SECONDS_PER_CLICK,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: std::net::IpAddr,
    pub port: u16,
    pub k: usize,
    pub budget: usize,
    pub record: bool,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection {
            host: [127, 0, 0, 1].into(),
            port: 8080,
            k: clickcarve_core::carving::DEFAULT_TOP_K,
            budget: clickcarve_core::carving::DEFAULT_BUDGET,
            record: false,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
    }

    pub fn ingest_with(&self, flags: &IngestFlags) -> IngestOptions {
        let mut o = self.ingest.clone();
        if let Some(r) = flags.radius {
            o.dilation_radius = r;
        }
        o.normalize_objectness |= flags.normalize;
        o.dedup |= flags.dedup;
        o
    }
}

/// Which annotated frames of each object to run on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FrameSelection {
    All,
    First,
    List(Vec<usize>),
}

impl FrameSelection {
    /// Pick from the annotated frames that also have a pool.
    pub fn pick(&self, available: impl Iterator<Item = usize>) -> Vec<usize> {
        let available: Vec<usize> = available.collect();
        match self {
            FrameSelection::All => available,
            FrameSelection::First => available.into_iter().take(1).collect(),
            FrameSelection::List(l) => available.into_iter().filter(|f| l.contains(f)).collect(),
        }
    }
}

impl FromStr for FrameSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(FrameSelection::All),
            "first" => Ok(FrameSelection::First),
            list => parse_list(list).map(FrameSelection::List),
        }
    }
}

impl TryFrom<String> for FrameSelection {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FrameSelection> for String {
    fn from(f: FrameSelection) -> String {
        f.to_string()
    }
}

impl fmt::Display for FrameSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSelection::All => f.write_str("all"),
            FrameSelection::First => f.write_str("first"),
            FrameSelection::List(l) => {
                let parts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::invalid(format!("bad list item {p:?} in {s:?}"))))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::invalid("empty list"));
    }
    Ok(out)
}

/// `a..b` (half-open) or `a,b,c`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| Error::invalid(format!("bad seed range {s:?}")))?;
        let b: u64 = b.trim().parse().map_err(|_| Error::invalid(format!("bad seed range {s:?}")))?;
        if b <= a {
            return Err(Error::invalid(format!("empty seed range {s:?}")));
        }
        return Ok((a..b).collect());
    }
    parse_list(s)
}

pub fn parse_policies(s: &str) -> Result<Vec<Policy>> {
    if s.trim() == "all" {
        return Ok(Policy::ALL.to_vec());
    }
    let mut out: Vec<Policy> = parse_list(s)?;
    out.dedup();
    Ok(out)
}

/// Short content hash of a serializable config. Object keys serialize in
/// sorted order, so equal configs give equal fingerprints.
pub fn fingerprint<T: Serialize>(kind: &str, value: &T) -> String {
    let json = serde_json::to_value(value).and_then(|v| serde_json::to_vec(&v)).expect("config serializes");
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update([0]);
    h.update(&json);
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}
