//! Skeleton observations: joints, frames, sequences and the body-local frame.

mod io;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_sequence, parse_sequence, save_sequence, sequence_to_json};
pub use synth::{synth_motion, ArmPose, BodyPose, Direction, MotionPattern, ReachStep, SynthSpec};

/// Errors raised while reading or transforming skeleton data.
#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid skeleton JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed frame {index}: joint {joint}")]
    MalformedFrame { index: usize, joint: JointName },
    #[error("timestamps not strictly increasing at frame {0}")]
    TimeOrder(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error("bad synthetic-motion descriptor: {0}")]
    BadDescriptor(String),
}

pub type Result<T> = std::result::Result<T, SkeletonError>;

/// Upper-body joints tracked by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JointName {
    SpineBase,
    SpineShoulder,
    Neck,
    Head,
    ShoulderLeft,
    ShoulderRight,
    ElbowLeft,
    ElbowRight,
    WristLeft,
    WristRight,
    HandLeft,
    HandRight,
}

impl JointName {
    pub const COUNT: usize = 12;

    pub const ALL: [JointName; Self::COUNT] = [
        JointName::SpineBase,
        JointName::SpineShoulder,
        JointName::Neck,
        JointName::Head,
        JointName::ShoulderLeft,
        JointName::ShoulderRight,
        JointName::ElbowLeft,
        JointName::ElbowRight,
        JointName::WristLeft,
        JointName::WristRight,
        JointName::HandLeft,
        JointName::HandRight,
    ];

    /// The joint nearer the spine base, or `None` for the root.
    pub fn parent(self) -> Option<JointName> {
        use JointName::*;
        match self {
            SpineBase => None,
            SpineShoulder => Some(SpineBase),
            Neck => Some(SpineShoulder),
            Head => Some(Neck),
            ShoulderLeft | ShoulderRight => Some(SpineShoulder),
            ElbowLeft => Some(ShoulderLeft),
            ElbowRight => Some(ShoulderRight),
            WristLeft => Some(ElbowLeft),
            WristRight => Some(ElbowRight),
            HandLeft => Some(WristLeft),
            HandRight => Some(WristRight),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        use JointName::*;
        match self {
            SpineBase => "SpineBase",
            SpineShoulder => "SpineShoulder",
            Neck => "Neck",
            Head => "Head",
            ShoulderLeft => "ShoulderLeft",
            ShoulderRight => "ShoulderRight",
            ElbowLeft => "ElbowLeft",
            ElbowRight => "ElbowRight",
            WristLeft => "WristLeft",
            WristRight => "WristRight",
            HandLeft => "HandLeft",
            HandRight => "HandRight",
        }
    }
}

impl fmt::Display for JointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        JointName::ALL
            .iter()
            .copied()
            .find(|j| j.as_str() == s)
            .ok_or_else(|| format!("unknown joint `{s}`"))
    }
}

/// One time-stamped sample of every tracked joint position, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub timestamp: f64,
    positions: [Vector3<f64>; JointName::COUNT],
}

impl SkeletonFrame {
    /// Builds a frame, checking that coordinates are finite and that no
    /// joint coincides with its parent. `index` is only used in errors.
    pub fn new(
        timestamp: f64,
        positions: [Vector3<f64>; JointName::COUNT],
        index: usize,
    ) -> Result<Self> {
        for joint in JointName::ALL {
            let p = positions[joint.index()];
            if !p.iter().all(|c| c.is_finite()) {
                return Err(SkeletonError::MalformedFrame { index, joint });
            }
            if let Some(parent) = joint.parent() {
                if (p - positions[parent.index()]).norm() <= 0.0 {
                    return Err(SkeletonError::MalformedFrame { index, joint });
                }
            }
        }
        Ok(Self {
            timestamp,
            positions,
        })
    }

    pub fn position(&self, joint: JointName) -> Vector3<f64> {
        self.positions[joint.index()]
    }

    pub fn positions(&self) -> &[Vector3<f64>; JointName::COUNT] {
        &self.positions
    }

    /// Applies `p -> rotation * p + translation` to every joint.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut positions = self.positions;
        for p in positions.iter_mut() {
            *p = rotation * *p + translation;
        }
        Self {
            timestamp: self.timestamp,
            positions,
        }
    }
}

/// Ordered skeleton frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    frames: Vec<SkeletonFrame>,
    /// Nominal rate in Hz: the file hint, the resampling rate, or the mean
    /// rate of the timestamps when neither is known.
    pub sample_rate: f64,
}

impl SkeletonSequence {
    pub fn new(frames: Vec<SkeletonFrame>, sample_rate: Option<f64>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if !f.timestamp.is_finite() || f.timestamp < 0.0 {
                return Err(SkeletonError::TimeOrder(i));
            }
            if i > 0 && f.timestamp <= frames[i - 1].timestamp {
                return Err(SkeletonError::TimeOrder(i));
            }
        }
        let sample_rate = match sample_rate {
            Some(r) if r.is_finite() && r > 0.0 => r,
            Some(r) => return Err(SkeletonError::BadRate(r)),
            None => mean_rate(&frames),
        };
        Ok(Self {
            frames,
            sample_rate,
        })
    }

    pub fn frames(&self) -> &[SkeletonFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.frames.first().map_or(0.0, |f| f.timestamp)
    }

    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// True when every timestamp delta equals `1 / sample_rate` within `tol` seconds.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let dt = 1.0 / self.sample_rate;
        self.frames
            .windows(2)
            .all(|w| ((w[1].timestamp - w[0].timestamp) - dt).abs() <= tol)
    }

    /// Position track of one joint.
    pub fn track(&self, joint: JointName) -> Vec<Vector3<f64>> {
        self.frames.iter().map(|f| f.position(joint)).collect()
    }

    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|f| f.transformed(rotation, translation))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

fn mean_rate(frames: &[SkeletonFrame]) -> f64 {
    match (frames.first(), frames.last()) {
        (Some(a), Some(b)) if frames.len() >= 2 && b.timestamp > a.timestamp => {
            (frames.len() - 1) as f64 / (b.timestamp - a.timestamp)
        }
        _ => 30.0,
    }
}

/// Resamples onto the uniform grid `t0 + k / rate` covering the original
/// time span, interpolating every coordinate linearly.
pub fn resample(seq: &SkeletonSequence, rate: f64) -> Result<SkeletonSequence> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SkeletonError::BadRate(rate));
    }
    let frames = seq.frames();
    if frames.len() < 2 {
        return Err(SkeletonError::InsufficientData(format!(
            "resampling needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let t0 = frames[0].timestamp;
    let span = frames[frames.len() - 1].timestamp - t0;
    let count = (span * rate + 1e-9).floor() as usize + 1;

    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let t = t0 + k as f64 / rate;
        while seg + 2 < frames.len() && frames[seg + 1].timestamp <= t {
            seg += 1;
        }
        let (a, b) = (&frames[seg], &frames[seg + 1]);
        let u = ((t - a.timestamp) / (b.timestamp - a.timestamp)).clamp(0.0, 1.0);
        let positions = if u == 0.0 {
            a.positions
        } else if u == 1.0 {
            b.positions
        } else {
            let mut p = a.positions;
            for (dst, q) in p.iter_mut().zip(b.positions.iter()) {
                *dst = *dst * (1.0 - u) + q * u;
            }
            p
        };
        out.push(SkeletonFrame {
            timestamp: t,
            positions,
        });
    }
    SkeletonSequence::new(out, Some(rate))
}

/// Person-anchored orthonormal frame: origin at the spine shoulder,
/// `forward = left x up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame {
    pub origin: Vector3<f64>,
    pub forward: Vector3<f64>,
    pub left: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl BodyFrame {
    /// Rows are the body axes, so `rotation() * v` gives body coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.forward.transpose(),
            self.left.transpose(),
            self.up.transpose(),
        ])
    }

    /// Components of a world-frame direction along (forward, left, up).
    pub fn to_body(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(v.dot(&self.forward), v.dot(&self.left), v.dot(&self.up))
    }
}

const DEGENERATE_EPS: f64 = 1e-6;

pub fn body_frame(frame: &SkeletonFrame) -> Result<BodyFrame> {
    let origin = frame.position(JointName::SpineShoulder);
    let spine = origin - frame.position(JointName::SpineBase);
    let spine_len = spine.norm();
    if spine_len < DEGENERATE_EPS {
        return Err(SkeletonError::DegeneratePose(format!(
            "spine length {spine_len:e} m"
        )));
    }
    let up = spine / spine_len;

    let span = frame.position(JointName::ShoulderLeft) - frame.position(JointName::ShoulderRight);
    let span_len = span.norm();
    if span_len < DEGENERATE_EPS {
        return Err(SkeletonError::DegeneratePose(format!(
            "shoulder span {span_len:e} m"
        )));
    }
    let lateral = span - up * span.dot(&up);
    let lateral_len = lateral.norm();
    if lateral_len < DEGENERATE_EPS * span_len {
        return Err(SkeletonError::DegeneratePose(
            "shoulders parallel to spine".into(),
        ));
    }
    let left = lateral / lateral_len;
    let forward = left.cross(&up);
    Ok(BodyFrame {
        origin,
        forward,
        left,
        up,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::Rotation3;

    /// Upright T-pose facing world +X with the left side along +Y.
    pub(crate) fn t_pose(timestamp: f64) -> SkeletonFrame {
        let mut p = [Vector3::zeros(); JointName::COUNT];
        let mut set = |j: JointName, x: f64, y: f64, z: f64| p[j.index()] = Vector3::new(x, y, z);
        set(JointName::SpineBase, 0.0, 0.0, 1.0);
        set(JointName::SpineShoulder, 0.0, 0.0, 1.5);
        set(JointName::Neck, 0.0, 0.0, 1.58);
        set(JointName::Head, 0.0, 0.0, 1.72);
        set(JointName::ShoulderLeft, 0.0, 0.18, 1.45);
        set(JointName::ShoulderRight, 0.0, -0.18, 1.45);
        set(JointName::ElbowLeft, 0.0, 0.48, 1.45);
        set(JointName::ElbowRight, 0.0, -0.48, 1.45);
        set(JointName::WristLeft, 0.0, 0.75, 1.45);
        set(JointName::WristRight, 0.0, -0.75, 1.45);
        set(JointName::HandLeft, 0.0, 0.83, 1.45);
        set(JointName::HandRight, 0.0, -0.83, 1.45);
        SkeletonFrame::new(timestamp, p, 0).unwrap()
    }

    #[test]
    fn parent_relation() {
        assert_eq!(JointName::WristLeft.parent(), Some(JointName::ElbowLeft));
        assert_eq!(JointName::HandRight.parent(), Some(JointName::WristRight));
        assert_eq!(
            JointName::SpineShoulder.parent(),
            Some(JointName::SpineBase)
        );
        assert_eq!(JointName::SpineBase.parent(), None);
    }

    #[test]
    fn axis_aligned_body_frame() {
        let bf = body_frame(&t_pose(0.0)).unwrap();
        assert!((bf.forward - Vector3::x()).norm() < 1e-12);
        assert!((bf.left - Vector3::y()).norm() < 1e-12);
        assert!((bf.up - Vector3::z()).norm() < 1e-12);
        assert_eq!(bf.origin, Vector3::new(0.0, 0.0, 1.5));
    }

    #[test]
    fn rotated_body_frame() {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let frame = t_pose(0.0).transformed(r.matrix(), &Vector3::zeros());
        let bf = body_frame(&frame).unwrap();
        assert!((bf.forward - Vector3::y()).norm() < 1e-12);
        assert!((bf.left + Vector3::x()).norm() < 1e-12);
        assert!((bf.rotation().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_shoulders_are_degenerate() {
        let mut p = *t_pose(0.0).positions();
        p[JointName::ShoulderLeft.index()] = p[JointName::ShoulderRight.index()];
        let frame = SkeletonFrame::new(0.0, p, 0).unwrap();
        assert!(matches!(
            body_frame(&frame),
            Err(SkeletonError::DegeneratePose(_))
        ));
    }

    #[test]
    fn shoulders_along_spine_are_degenerate() {
        let mut p = *t_pose(0.0).positions();
        p[JointName::ShoulderLeft.index()] = Vector3::new(0.0, 0.0, 1.6);
        p[JointName::ShoulderRight.index()] = Vector3::new(0.0, 0.0, 1.3);
        let frame = SkeletonFrame::new(0.0, p, 0).unwrap();
        assert!(body_frame(&frame).is_err());
    }

    #[test]
    fn frame_rejects_non_finite_and_zero_segments() {
        let mut p = *t_pose(0.0).positions();
        p[JointName::ElbowLeft.index()].x = f64::NAN;
        assert!(matches!(
            SkeletonFrame::new(0.0, p, 3),
            Err(SkeletonError::MalformedFrame {
                index: 3,
                joint: JointName::ElbowLeft
            })
        ));
        let mut p = *t_pose(0.0).positions();
        p[JointName::HandLeft.index()] = p[JointName::WristLeft.index()];
        assert!(SkeletonFrame::new(0.0, p, 0).is_err());
    }

    #[test]
    fn resample_midpoint() {
        let a = t_pose(0.0);
        let mut p = *a.positions();
        for v in p.iter_mut() {
            v.x += 1.0;
        }
        let b = SkeletonFrame::new(1.0, p, 1).unwrap();
        let seq = SkeletonSequence::new(vec![a, b], None).unwrap();
        let r = resample(&seq, 2.0).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r.frames()[1].timestamp - 0.5).abs() < 1e-12);
        assert!((r.frames()[1].position(JointName::Head).x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resample_single_frame_fails() {
        let seq = SkeletonSequence::new(vec![t_pose(0.0)], None).unwrap();
        assert!(matches!(
            resample(&seq, 30.0),
            Err(SkeletonError::InsufficientData(_))
        ));
    }

    #[test]
    fn resample_identity_on_uniform_input() {
        let frames: Vec<_> = (0..31)
            .map(|k| {
                let mut p = *t_pose(0.0).positions();
                for v in p.iter_mut() {
                    v.y += (k as f64 * 0.3).sin();
                }
                SkeletonFrame::new(k as f64 / 30.0, p, k).unwrap()
            })
            .collect();
        let seq = SkeletonSequence::new(frames, Some(30.0)).unwrap();
        let r = resample(&seq, 30.0).unwrap();
        assert_eq!(r.len(), seq.len());
        for (a, b) in r.frames().iter().zip(seq.frames()) {
            for j in JointName::ALL {
                assert!((a.position(j) - b.position(j)).norm() < 1e-9);
            }
        }
        assert!(r.is_uniform(1e-9));
    }

    #[test]
    fn sequence_rejects_repeated_timestamp() {
        let err = SkeletonSequence::new(vec![t_pose(0.0), t_pose(0.0)], None).unwrap_err();
        assert!(matches!(err, SkeletonError::TimeOrder(1)));
    }
}
