//! Joint-space trajectories between key poses and the motion dictionary.

mod dictionary;

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot::{JointPose, RobotDescription};

pub use dictionary::{
    dict_lookup, dict_update, format_state, parse_state, path_distance, resample_path, synthesize,
    DictEntry, DictKey, DictStats, JointPath, MotionDictionary, State, DEFAULT_TAU, PATH_SAMPLES,
};

/// Grid samples this close to a key time, in seconds, take the key pose
/// exactly. Matches the microsecond grid of score times.
pub const SNAP_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("key pose times not strictly increasing at index {0}")]
    TimeOrder(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dictionary: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TrajectoryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMode {
    #[default]
    Linear,
    /// Hermite with zero velocity at every key pose.
    Cubic,
}

impl FromStr for InterpMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(InterpMode::Linear),
            "cubic" => Ok(InterpMode::Cubic),
            other => Err(format!(
                "unknown interpolation `{other}` (expected linear|cubic)"
            )),
        }
    }
}

impl InterpMode {
    /// Blend weight of the end pose at normalized time `u`.
    pub fn weight(self, u: f64) -> f64 {
        match self {
            InterpMode::Linear => u,
            InterpMode::Cubic => u * u * (3.0 - 2.0 * u),
        }
    }
}

/// `(1 - w) a + w b`, exact at both ends.
pub(crate) fn blend(a: f64, b: f64, w: f64) -> f64 {
    (1.0 - w) * a + w * b
}

/// Uniformly sampled joint-space motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rate: f64,
    pub joints: Vec<String>,
    pub samples: Vec<JointPose>,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Sample whose time lies within [`SNAP_EPS`] of `t`.
    pub fn sample_at(&self, t: f64) -> Option<&JointPose> {
        let k = ((t - self.start_time()) * self.rate).round();
        if k < 0.0 {
            return None;
        }
        self.samples
            .get(k as usize)
            .filter(|s| (s.t - t).abs() <= SNAP_EPS)
    }

    /// Clamps every angle into the robot's declared limits.
    pub fn clamp_to(&mut self, robot: &RobotDescription) {
        for s in &mut self.samples {
            for (joint, value) in s.angles.iter_mut() {
                if let Some([lo, hi]) = robot.joint_limits(joint) {
                    *value = value.clamp(lo, hi);
                }
            }
        }
    }

    /// CSV with header `t,<joints...>` and six-decimal values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.joints.iter().cloned());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![format!("{:.6}", s.t)];
            row.extend(self.joints.iter().map(|j| format!("{:.6}", s.angles[j])));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| TrajectoryError::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// How one key-pose interval is filled.
#[derive(Debug, Clone, PartialEq)]
pub enum Span {
    Interp(InterpMode),
    /// Stored path warped onto the interval with its endpoint residuals
    /// ramped away.
    Path(JointPath),
}

/// Continuous piecewise motion through key poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    keys: Vec<JointPose>,
    spans: Vec<Span>,
    joints: Vec<String>,
}

pub(crate) fn check_keyposes(keyposes: &[JointPose]) -> Result<Vec<String>> {
    if keyposes.len() < 2 {
        return Err(TrajectoryError::InsufficientData(format!(
            "{} key pose(s), need at least 2",
            keyposes.len()
        )));
    }
    let joints: Vec<String> = keyposes[0].angles.keys().cloned().collect();
    for (i, k) in keyposes.iter().enumerate() {
        if !k.t.is_finite() || k.angles.values().any(|a| !a.is_finite()) {
            return Err(TrajectoryError::Shape(format!(
                "key pose {i} is not finite"
            )));
        }
        if !k.angles.keys().eq(joints.iter()) {
            return Err(TrajectoryError::Shape(format!(
                "key pose {i} has a different joint set"
            )));
        }
        if i > 0 && k.t <= keyposes[i - 1].t {
            return Err(TrajectoryError::TimeOrder(i));
        }
    }
    Ok(joints)
}

impl Interpolant {
    pub fn new(keyposes: &[JointPose], mode: InterpMode) -> Result<Self> {
        let spans = vec![Span::Interp(mode); keyposes.len().saturating_sub(1)];
        Self::with_spans(keyposes, spans)
    }

    pub fn with_spans(keyposes: &[JointPose], spans: Vec<Span>) -> Result<Self> {
        let joints = check_keyposes(keyposes)?;
        if spans.len() != keyposes.len() - 1 {
            return Err(TrajectoryError::Shape(format!(
                "{} spans for {} key poses",
                spans.len(),
                keyposes.len()
            )));
        }
        for span in &spans {
            if let Span::Path(p) = span {
                if p.joints != joints {
                    return Err(TrajectoryError::Shape(
                        "path joints differ from key pose joints".into(),
                    ));
                }
            }
        }
        Ok(Self {
            keys: keyposes.to_vec(),
            spans,
            joints,
        })
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn start(&self) -> f64 {
        self.keys[0].t
    }

    pub fn end(&self) -> f64 {
        self.keys[self.keys.len() - 1].t
    }

    /// Angles at `t`, clamped to the key-time range. Key times return the
    /// key pose itself.
    pub fn eval(&self, t: f64) -> BTreeMap<String, f64> {
        let i = self.keys.partition_point(|k| k.t <= t);
        if i > 0 && t - self.keys[i - 1].t <= SNAP_EPS {
            return self.keys[i - 1].angles.clone();
        }
        if i < self.keys.len() && self.keys[i].t - t <= SNAP_EPS {
            return self.keys[i].angles.clone();
        }
        if i == 0 {
            return self.keys[0].angles.clone();
        }
        if i == self.keys.len() {
            return self.keys[i - 1].angles.clone();
        }
        let (a, b) = (&self.keys[i - 1], &self.keys[i]);
        let u = (t - a.t) / (b.t - a.t);
        match &self.spans[i - 1] {
            Span::Interp(mode) => {
                let w = mode.weight(u);
                self.joints
                    .iter()
                    .map(|j| {
                        let (p0, p1) = (a.angles[j], b.angles[j]);
                        let v = blend(p0, p1, w).clamp(p0.min(p1), p0.max(p1));
                        (j.clone(), v)
                    })
                    .collect()
            }
            Span::Path(path) => {
                let start = path.at(0.0);
                let end = path.at(1.0);
                let mid = path.at(u);
                self.joints
                    .iter()
                    .enumerate()
                    .map(|(c, j)| {
                        let r0 = a.angles[j] - start[c];
                        let r1 = b.angles[j] - end[c];
                        (j.clone(), mid[c] + blend(r0, r1, u))
                    })
                    .collect()
            }
        }
    }

    /// Samples `t_first + k / rate` up to the last key time.
    pub fn sample(&self, rate: f64) -> Result<Trajectory> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(TrajectoryError::BadRate(rate));
        }
        let t0 = self.start();
        let n = ((self.end() - t0) * rate + SNAP_EPS * rate).floor() as usize + 1;
        let samples = (0..n)
            .map(|k| {
                let t = t0 + k as f64 / rate;
                JointPose {
                    t,
                    angles: self.eval(t),
                }
            })
            .collect();
        Ok(Trajectory {
            rate,
            joints: self.joints.clone(),
            samples,
        })
    }
}

/// Per-joint piecewise interpolation through `keyposes`, sampled at `rate`.
pub fn interpolate(keyposes: &[JointPose], mode: InterpMode, rate: f64) -> Result<Trajectory> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(TrajectoryError::BadRate(rate));
    }
    Interpolant::new(keyposes, mode)?.sample(rate)
}
