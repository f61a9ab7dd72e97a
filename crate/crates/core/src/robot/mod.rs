//! Robot kinematic descriptions and score decoding.
//!
//! A robot is a set of named chains of gimbal segments. Each segment points
//! along a body-frame direction through a yaw joint (about up, positive
//! toward left) and a pitch joint (positive toward up); an optional roll
//! joint is carried but always commanded to zero. The column map routes
//! score columns onto segments.

mod decode;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laban::{ColumnName, LabanError, LabanSymbol};

pub use decode::{
    concatenate, decode_detailed, decode_score, reduce_columns, reduce_vectors, retarget_frame,
    roundtrip, symbol_to_vector, vector_to_joints, CellCheck, CellOutcome, ConcatenationState,
    DecodedPose, Origin, RoundtripReport, SegmentOutcome,
};

/// Largest number of columns that may merge onto one segment.
pub const MAX_FAN_IN: usize = 3;

const BUILTIN_7DOF: &str = include_str!("../../robots/frontal_7dof.json");
const BUILTIN_9DOF: &str = include_str!("../../robots/waist_9dof.json");

/// Names accepted by [`RobotDescription::builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["7dof", "9dof"];

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("robot description: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid robot description: {0}")]
    Invalid(String),
    #[error("unknown builtin robot `{0}` (expected one of 7dof, 9dof)")]
    UnknownBuiltin(String),
    #[error("no source column available for segment {0}")]
    MissingColumn(SegmentRef),
    #[error("symbol {0} has no direction")]
    BadSymbol(LabanSymbol),
    #[error(transparent)]
    Score(#[from] LabanError),
}

pub type Result<T> = std::result::Result<T, RobotError>;

/// Reference to a segment as `chain/index`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentRef {
    pub chain: String,
    pub index: usize,
}

impl SegmentRef {
    pub fn new(chain: impl Into<String>, index: usize) -> Self {
        Self {
            chain: chain.into(),
            index,
        }
    }
}

impl fmt::Display for SegmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.chain, self.index)
    }
}

impl FromStr for SegmentRef {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (chain, idx) = s
            .rsplit_once('/')
            .ok_or_else(|| format!("segment reference `{s}` is not chain/index"))?;
        let index = idx
            .parse()
            .map_err(|_| format!("segment reference `{s}` has a bad index"))?;
        if chain.is_empty() {
            return Err(format!("segment reference `{s}` has an empty chain"));
        }
        Ok(SegmentRef::new(chain, index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_joint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_joint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll_joint: Option<String>,
    #[serde(default)]
    pub yaw_limits: [f64; 2],
    #[serde(default)]
    pub pitch_limits: [f64; 2],
}

impl Segment {
    /// Limits of the yaw axis; an absent joint is fixed at zero.
    pub fn effective_yaw_limits(&self) -> [f64; 2] {
        if self.yaw_joint.is_some() {
            self.yaw_limits
        } else {
            [0.0, 0.0]
        }
    }

    pub fn effective_pitch_limits(&self) -> [f64; 2] {
        if self.pitch_joint.is_some() {
            self.pitch_limits
        } else {
            [0.0, 0.0]
        }
    }

    /// Joint names in yaw, pitch, roll order.
    pub fn joints(&self) -> impl Iterator<Item = &str> {
        [&self.yaw_joint, &self.pitch_joint, &self.roll_joint]
            .into_iter()
            .filter_map(|j| j.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub name: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescription {
    pub name: String,
    pub chains: Vec<Chain>,
    pub column_map: BTreeMap<ColumnName, Vec<String>>,
}

/// Timed joint-space configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPose {
    pub t: f64,
    pub angles: BTreeMap<String, f64>,
}

fn check_limits(what: &str, lim: [f64; 2]) -> std::result::Result<(), String> {
    let [lo, hi] = lim;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(format!("{what} limits must be finite"));
    }
    if lo > hi {
        return Err(format!("{what} limits [{lo}, {hi}] have lo > hi"));
    }
    if lo < -180.0 || hi > 180.0 {
        return Err(format!("{what} limits [{lo}, {hi}] exceed [-180, 180]"));
    }
    Ok(())
}

impl RobotDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        let robot: RobotDescription = serde_json::from_str(text)?;
        robot.validate()?;
        Ok(robot)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RobotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "7dof" => Self::from_json(BUILTIN_7DOF),
            "9dof" => Self::from_json(BUILTIN_9DOF),
            other => Err(RobotError::UnknownBuiltin(other.to_string())),
        }
    }

    /// Existing file paths win over builtin names.
    pub fn load_or_builtin(arg: &str) -> Result<Self> {
        if Path::new(arg).exists() || !BUILTIN_NAMES.contains(&arg) {
            Self::load(arg)
        } else {
            Self::builtin(arg)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(RobotError::Invalid)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("empty robot name".into());
        }
        if self.chains.is_empty() {
            return Err("no chains".into());
        }
        let mut chain_names = BTreeSet::new();
        let mut joint_names = BTreeSet::new();
        for chain in &self.chains {
            if chain.name.is_empty() || chain.name.contains('/') {
                return Err(format!("bad chain name `{}`", chain.name));
            }
            if !chain_names.insert(chain.name.as_str()) {
                return Err(format!("duplicate chain `{}`", chain.name));
            }
            for (i, seg) in chain.segments.iter().enumerate() {
                let at = format!("{}/{}", chain.name, i);
                if seg.joints().next().is_none() {
                    return Err(format!("segment {at} has no joints"));
                }
                for j in seg.joints() {
                    if j.is_empty() {
                        return Err(format!("segment {at} has an empty joint name"));
                    }
                    if !joint_names.insert(j) {
                        return Err(format!("joint `{j}` declared twice"));
                    }
                }
                check_limits(&format!("{at} yaw"), seg.yaw_limits)?;
                check_limits(&format!("{at} pitch"), seg.pitch_limits)?;
            }
        }
        let mut fan_in: BTreeMap<SegmentRef, usize> = BTreeMap::new();
        for (column, refs) in &self.column_map {
            if refs.is_empty() {
                return Err(format!("column {column} maps to no segments"));
            }
            let mut seen = BTreeSet::new();
            for r in refs {
                let sr: SegmentRef = r.parse()?;
                if self.segment(&sr).is_none() {
                    return Err(format!("column {column} references missing segment {r}"));
                }
                if !seen.insert(sr.clone()) {
                    return Err(format!("column {column} references {r} twice"));
                }
                *fan_in.entry(sr).or_default() += 1;
            }
        }
        if let Some((seg, n)) = fan_in.iter().find(|(_, &n)| n > MAX_FAN_IN) {
            return Err(format!(
                "segment {seg} is fed by {n} columns (max {MAX_FAN_IN})"
            ));
        }
        Ok(())
    }

    pub fn segment(&self, r: &SegmentRef) -> Option<&Segment> {
        self.chains
            .iter()
            .find(|c| c.name == r.chain)
            .and_then(|c| c.segments.get(r.index))
    }

    /// All segments in declaration order.
    pub fn segments(&self) -> impl Iterator<Item = (SegmentRef, &Segment)> {
        self.chains.iter().flat_map(|c| {
            c.segments
                .iter()
                .enumerate()
                .map(move |(i, s)| (SegmentRef::new(c.name.clone(), i), s))
        })
    }

    /// Joint names in declaration order.
    pub fn joint_names(&self) -> Vec<String> {
        self.segments()
            .flat_map(|(_, s)| s.joints().map(str::to_string).collect::<Vec<_>>())
            .collect()
    }

    /// Limits of a joint; roll joints are fixed at zero.
    pub fn joint_limits(&self, joint: &str) -> Option<[f64; 2]> {
        self.segments().find_map(|(_, s)| {
            if s.yaw_joint.as_deref() == Some(joint) {
                Some(s.yaw_limits)
            } else if s.pitch_joint.as_deref() == Some(joint) {
                Some(s.pitch_limits)
            } else if s.roll_joint.as_deref() == Some(joint) {
                Some([0.0, 0.0])
            } else {
                None
            }
        })
    }

    /// Columns feeding each mapped segment, in column order.
    pub fn sources(&self) -> BTreeMap<SegmentRef, Vec<ColumnName>> {
        let mut out: BTreeMap<SegmentRef, Vec<ColumnName>> = BTreeMap::new();
        for (column, refs) in &self.column_map {
            for r in refs {
                if let Ok(sr) = r.parse::<SegmentRef>() {
                    out.entry(sr).or_default().push(*column);
                }
            }
        }
        out
    }

    /// Segments a column feeds.
    pub fn targets(&self, column: ColumnName) -> Vec<SegmentRef> {
        self.column_map
            .get(&column)
            .map(|refs| refs.iter().filter_map(|r| r.parse().ok()).collect())
            .unwrap_or_default()
    }

    /// Zero on every joint, clamped into limits.
    pub fn neutral_angles(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (_, s) in self.segments() {
            let (yaw, pitch) = neutral_yaw_pitch(s);
            insert_segment_angles(&mut out, s, yaw, pitch);
        }
        out
    }

    pub fn dof(&self) -> usize {
        self.joint_names().len()
    }
}

pub(crate) fn neutral_yaw_pitch(s: &Segment) -> (f64, f64) {
    let [ylo, yhi] = s.effective_yaw_limits();
    let [plo, phi] = s.effective_pitch_limits();
    (0f64.clamp(ylo, yhi), 0f64.clamp(plo, phi))
}

pub(crate) fn insert_segment_angles(
    out: &mut BTreeMap<String, f64>,
    s: &Segment,
    yaw: f64,
    pitch: f64,
) {
    if let Some(j) = &s.yaw_joint {
        out.insert(j.clone(), yaw);
    }
    if let Some(j) = &s.pitch_joint {
        out.insert(j.clone(), pitch);
    }
    if let Some(j) = &s.roll_joint {
        out.insert(j.clone(), 0.0);
    }
}
