use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    blend, check_keyposes, InterpMode, Interpolant, Result, Span, Trajectory, TrajectoryError,
};
use crate::laban::{ColumnName, LabanSymbol};
use crate::robot::JointPose;

/// Samples per stored path.
pub const PATH_SAMPLES: usize = 32;
/// RMS distance, in degrees, under which an observation reinforces a path.
pub const DEFAULT_TAU: f64 = 10.0;

/// Symbols held by each column at a key pose.
pub type State = BTreeMap<ColumnName, LabanSymbol>;

const REST: &str = "rest";

/// `Column=Direction:Level` pairs joined by commas in column order, or
/// `rest` for the empty state.
pub fn format_state(state: &State) -> String {
    if state.is_empty() {
        return REST.to_string();
    }
    state
        .iter()
        .map(|(c, s)| format!("{c}={s}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_state(text: &str) -> std::result::Result<State, String> {
    if text == REST {
        return Ok(State::new());
    }
    let mut out = State::new();
    for item in text.split(',') {
        let (c, s) = item
            .split_once('=')
            .ok_or_else(|| format!("bad state item `{item}`"))?;
        if out.insert(c.parse()?, s.parse()?).is_some() {
            return Err(format!("column {c} repeated"));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DictKey {
    pub from: State,
    pub to: State,
}

impl fmt::Display for DictKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {}",
            format_state(&self.from),
            format_state(&self.to)
        )
    }
}

impl FromStr for DictKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(" -> ")
            .ok_or_else(|| format!("dictionary key `{s}` lacks ` -> `"))?;
        let key = DictKey {
            from: parse_state(a)?,
            to: parse_state(b)?,
        };
        if key.to_string() != s {
            return Err(format!("dictionary key `{s}` is not canonical"));
        }
        Ok(key)
    }
}

/// Joint angles on a normalized-time grid; one row per sample, columns
/// follow `joints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPath {
    pub joints: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl JointPath {
    /// Linear interpolation at normalized time `u` in [0, 1].
    pub fn at(&self, u: f64) -> Vec<f64> {
        let last = self.samples.len() - 1;
        let x = u.clamp(0.0, 1.0) * last as f64;
        let i = (x.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return self.samples[0].clone();
        }
        let w = x - i as f64;
        self.samples[i]
            .iter()
            .zip(&self.samples[i + 1])
            .map(|(&a, &b)| blend(a, b, w))
            .collect()
    }
}

/// Resamples observed poses onto `n` points evenly spaced in normalized
/// time, interpolating each joint linearly.
pub fn resample_path(observed: &[JointPose], n: usize) -> Result<JointPath> {
    if observed.len() < 2 || n < 2 {
        return Err(TrajectoryError::InsufficientData(format!(
            "{} observed sample(s), need at least 2",
            observed.len()
        )));
    }
    let joints = check_keyposes(observed)?;
    let (t0, t1) = (observed[0].t, observed[observed.len() - 1].t);
    let mut samples = Vec::with_capacity(n);
    let mut i = 0;
    for k in 0..n {
        let t = if k == n - 1 {
            t1
        } else {
            t0 + (t1 - t0) * k as f64 / (n - 1) as f64
        };
        while i + 2 < observed.len() && observed[i + 1].t <= t {
            i += 1;
        }
        let (a, b) = (&observed[i], &observed[i + 1]);
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        samples.push(
            joints
                .iter()
                .map(|j| blend(a.angles[j], b.angles[j], w))
                .collect(),
        );
    }
    Ok(JointPath { joints, samples })
}

/// Root-mean-square angle difference over all samples and joints.
pub fn path_distance(a: &JointPath, b: &JointPath) -> Result<f64> {
    if a.joints != b.joints || a.samples.len() != b.samples.len() {
        return Err(TrajectoryError::Shape(format!(
            "paths of {}x{} and {}x{} samples",
            a.samples.len(),
            a.joints.len(),
            b.samples.len(),
            b.joints.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ra, rb) in a.samples.iter().zip(&b.samples) {
        if ra.len() != a.joints.len() || rb.len() != b.joints.len() {
            return Err(TrajectoryError::Shape("ragged path row".into()));
        }
        for (x, y) in ra.iter().zip(rb) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(TrajectoryError::Shape("empty path".into()));
    }
    Ok((sum / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredPath {
    pub count: u64,
    #[serde(flatten)]
    pub path: JointPath,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DictEntry {
    pub paths: Vec<StoredPath>,
}

impl DictEntry {
    pub fn total(&self) -> u64 {
        self.paths.iter().map(|p| p.count).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.paths.iter().map(|p| p.count as f64 / total).collect()
    }

    /// Index of the most observed path; ties go to the lowest index.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.paths.iter().enumerate() {
            if best.is_none_or(|b| p.count > self.paths[b].count) {
                best = Some(i);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDictionary {
    pub tau: f64,
    pub entries: BTreeMap<DictKey, DictEntry>,
}

impl Default for MotionDictionary {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            entries: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDictionary {
    tau: f64,
    path_samples: usize,
    entries: BTreeMap<String, RawEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    paths: Vec<StoredPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryStats {
    pub key: String,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictStats {
    pub tau: f64,
    pub keys: usize,
    pub paths: usize,
    pub observations: u64,
    pub entries: Vec<EntryStats>,
}

impl MotionDictionary {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(TrajectoryError::InvalidDictionary(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            entries: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> String {
        let raw = RawDictionary {
            tau: self.tau,
            path_samples: PATH_SAMPLES,
            entries: self
                .entries
                .iter()
                .map(|(k, e)| {
                    (
                        k.to_string(),
                        RawEntry {
                            paths: e.paths.clone(),
                        },
                    )
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&raw).expect("dictionary serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDictionary = serde_json::from_str(text)?;
        let invalid = |m: String| TrajectoryError::InvalidDictionary(m);
        let mut dict = Self::new(raw.tau)?;
        if raw.path_samples != PATH_SAMPLES {
            return Err(invalid(format!(
                "path_samples {} != {PATH_SAMPLES}",
                raw.path_samples
            )));
        }
        for (k, e) in raw.entries {
            let key: DictKey = k.parse().map_err(invalid)?;
            if e.paths.is_empty() {
                return Err(invalid(format!("entry `{k}` has no paths")));
            }
            for p in &e.paths {
                if p.count == 0 {
                    return Err(invalid(format!("entry `{k}` has a zero count")));
                }
                if p.path.samples.len() != PATH_SAMPLES
                    || p.path
                        .samples
                        .iter()
                        .any(|r| r.len() != p.path.joints.len())
                {
                    return Err(invalid(format!("entry `{k}` has a malformed path")));
                }
            }
            for (i, a) in e.paths.iter().enumerate() {
                for b in &e.paths[i + 1..] {
                    if path_distance(&a.path, &b.path)? < dict.tau {
                        return Err(invalid(format!("entry `{k}` holds paths closer than tau")));
                    }
                }
            }
            dict.entries.insert(key, DictEntry { paths: e.paths });
        }
        Ok(dict)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TrajectoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| TrajectoryError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn stats(&self) -> DictStats {
        DictStats {
            tau: self.tau,
            keys: self.entries.len(),
            paths: self.entries.values().map(|e| e.paths.len()).sum(),
            observations: self.entries.values().map(DictEntry::total).sum(),
            entries: self
                .entries
                .iter()
                .map(|(k, e)| EntryStats {
                    key: k.to_string(),
                    counts: e.paths.iter().map(|p| p.count).collect(),
                    probabilities: e.probabilities(),
                })
                .collect(),
        }
    }
}

/// Records an observed transition. Reinforces the nearest stored path when
/// it lies within tau (ties go to the lowest index), otherwise appends a
/// new path. Returns the index of the path counted.
pub fn dict_update(
    dict: &mut MotionDictionary,
    key: DictKey,
    observed: &[JointPose],
) -> Result<usize> {
    let path = resample_path(observed, PATH_SAMPLES)?;
    let tau = dict.tau;
    let entry = dict.entries.entry(key).or_default();
    let mut nearest: Option<(usize, f64)> = None;
    for (i, p) in entry.paths.iter().enumerate() {
        if p.path.joints != path.joints {
            continue;
        }
        let d = path_distance(&p.path, &path)?;
        if nearest.is_none_or(|(_, best)| d < best) {
            nearest = Some((i, d));
        }
    }
    match nearest {
        Some((i, d)) if d < tau => {
            entry.paths[i].count += 1;
            Ok(i)
        }
        _ => {
            entry.paths.push(StoredPath { count: 1, path });
            Ok(entry.paths.len() - 1)
        }
    }
}

/// Most probable path for `key`.
pub fn dict_lookup<'a>(dict: &'a MotionDictionary, key: &DictKey) -> Option<&'a JointPath> {
    let entry = dict.entries.get(key)?;
    entry.best().map(|i| &entry.paths[i].path)
}

/// Trajectory through `keyposes` that replays dictionary paths where the
/// state transition is known and interpolates elsewhere.
pub fn synthesize(
    keyposes: &[JointPose],
    states: &[State],
    dict: &MotionDictionary,
    mode: InterpMode,
    rate: f64,
) -> Result<Trajectory> {
    if states.len() != keyposes.len() {
        return Err(TrajectoryError::Shape(format!(
            "{} states for {} key poses",
            states.len(),
            keyposes.len()
        )));
    }
    let joints = check_keyposes(keyposes)?;
    let spans = states
        .windows(2)
        .map(|w| {
            let key = DictKey {
                from: w[0].clone(),
                to: w[1].clone(),
            };
            match dict_lookup(dict, &key) {
                Some(p) if p.joints == joints => Span::Path(p.clone()),
                _ => Span::Interp(mode),
            }
        })
        .collect();
    Interpolant::with_spans(keyposes, spans)?.sample(rate)
}
