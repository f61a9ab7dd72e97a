//! Skeleton key poses to Labanotation symbols and scores.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyframe::KeyFrameSet;
use crate::laban::{
    validate, ColumnName, LabanCell, LabanColumn, LabanDirection, LabanLevel, LabanScore,
    LabanSymbol, Violation,
};
use crate::skeleton::{body_frame, JointName, SkeletonFrame, SkeletonSequence};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error("degenerate pose in column {column}: {reason}")]
    DegenerateColumn { column: ColumnName, reason: String },
    #[error("direction vector is not unit length (norm {0})")]
    BadInput(f64),
    #[error("no key frames to encode")]
    NoKeyFrames,
    #[error("key frame {0} outside the sequence")]
    KeyFrameOutOfRange(usize),
    #[error("encoded score failed validation: {0:?}")]
    Invalid(Vec<Violation>),
}

pub type Result<T> = std::result::Result<T, EncodeError>;

/// Which columns describe the arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnsMode {
    /// One whole-arm column per side.
    #[default]
    Arm,
    /// Upper-arm and forearm columns per side.
    Split,
}

impl std::str::FromStr for ColumnsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "arm" => Ok(ColumnsMode::Arm),
            "split" => Ok(ColumnsMode::Split),
            other => Err(format!(
                "unknown columns mode `{other}` (expected arm|split)"
            )),
        }
    }
}

impl ColumnsMode {
    pub fn columns(self) -> Vec<ColumnName> {
        use ColumnName::*;
        match self {
            ColumnsMode::Arm => vec![LeftArm, RightArm, Head],
            ColumnsMode::Split => {
                vec![LeftUpperArm, LeftForearm, RightUpperArm, RightForearm, Head]
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnsMode::Arm => "arm",
            ColumnsMode::Split => "split",
        }
    }
}

/// Distal joint whose direction from its parent represents the column. The
/// whole-arm column uses the forearm.
pub fn column_joint(column: ColumnName) -> JointName {
    use ColumnName::*;
    match column {
        LeftArm | LeftForearm => JointName::WristLeft,
        RightArm | RightForearm => JointName::WristRight,
        LeftUpperArm => JointName::ElbowLeft,
        RightUpperArm => JointName::ElbowRight,
        Head => JointName::Head,
    }
}

/// Unit direction from `distal`'s parent to `distal`, in body coordinates
/// (forward, left, up).
pub fn segment_direction(frame: &SkeletonFrame, distal: JointName) -> Result<Vector3<f64>> {
    let parent = distal
        .parent()
        .ok_or_else(|| EncodeError::DegeneratePose(format!("{distal} has no parent")))?;
    let bf = body_frame(frame).map_err(|e| EncodeError::DegeneratePose(e.to_string()))?;
    let d = frame.position(distal) - frame.position(parent);
    let len = d.norm();
    if !(len > 1e-9) {
        return Err(EncodeError::DegeneratePose(format!(
            "zero-length segment {parent} -> {distal}"
        )));
    }
    Ok(bf.to_body(&(d / len)))
}

fn direction_for_sector(sector: usize) -> LabanDirection {
    use LabanDirection::*;
    [
        Forward,
        LeftForward,
        Left,
        LeftBackward,
        Backward,
        RightBackward,
        Right,
        RightForward,
    ][sector % 8]
}

/// Quantizes a body-frame unit vector into a symbol. Azimuth sectors are
/// 45 degrees wide centered on the eight directions and closed at their
/// lower (clockwise) edge; levels split at +-22.5 and +-67.5 degrees.
pub fn digitize(v: &Vector3<f64>) -> Result<LabanSymbol> {
    let n = v.norm();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(EncodeError::BadInput(n));
    }
    let elevation = v.z.clamp(-1.0, 1.0).asin().to_degrees();
    if elevation >= 67.5 {
        return Ok(LabanSymbol::new(LabanDirection::Place, LabanLevel::High));
    }
    if elevation <= -67.5 {
        return Ok(LabanSymbol::new(LabanDirection::Place, LabanLevel::Low));
    }
    let level = if elevation >= 22.5 {
        LabanLevel::High
    } else if elevation > -22.5 {
        LabanLevel::Middle
    } else {
        LabanLevel::Low
    };
    let azimuth = v.y.atan2(v.x).to_degrees();
    let sector = ((azimuth + 22.5).rem_euclid(360.0) / 45.0).floor() as usize;
    Ok(LabanSymbol::new(direction_for_sector(sector), level))
}

pub fn encode_pose(
    frame: &SkeletonFrame,
    columns: &[ColumnName],
) -> Result<BTreeMap<ColumnName, LabanSymbol>> {
    columns
        .iter()
        .map(|&column| {
            let v = segment_direction(frame, column_joint(column)).map_err(|e| {
                EncodeError::DegenerateColumn {
                    column,
                    reason: e.to_string(),
                }
            })?;
            Ok((column, digitize(&v)?))
        })
        .collect()
}

/// Rounds to the microsecond grid the score format stores exactly.
pub fn quantize_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// One cell per column per key frame, spanning from the previous key frame
/// (or the clip start) to this one; equal neighbours are coalesced.
/// Times are relative to the first frame.
pub fn encode_sequence(
    seq: &SkeletonSequence,
    kfs: &KeyFrameSet,
    columns: &[ColumnName],
) -> Result<LabanScore> {
    if kfs.merged.is_empty() {
        return Err(EncodeError::NoKeyFrames);
    }
    let t0 = seq.start_time();
    let total = quantize_time(seq.duration());
    let mut cols: Vec<LabanColumn> = columns
        .iter()
        .map(|&name| LabanColumn {
            name,
            cells: Vec::new(),
        })
        .collect();

    let mut prev = 0.0;
    for &k in &kfs.merged {
        let frame = seq
            .frames()
            .get(k)
            .ok_or(EncodeError::KeyFrameOutOfRange(k))?;
        let t = quantize_time(frame.timestamp - t0);
        if t <= prev {
            // a key frame on the clip start (or a repeated time) spans nothing
            continue;
        }
        let pose = encode_pose(frame, columns)?;
        for col in cols.iter_mut() {
            let symbol = pose[&col.name];
            match col.cells.last_mut() {
                Some(last) if last.symbol == symbol => {
                    last.duration = quantize_time(t - last.start);
                }
                _ => col.cells.push(LabanCell {
                    symbol,
                    start: prev,
                    duration: quantize_time(t - prev),
                }),
            }
        }
        prev = t;
    }
    if cols.iter().all(|c| c.cells.is_empty()) {
        return Err(EncodeError::NoKeyFrames);
    }

    let mut meta = BTreeMap::new();
    meta.insert("sample_rate".to_string(), format!("{}", seq.sample_rate));
    meta.insert("key_frames".to_string(), kfs.merged.len().to_string());
    let score = LabanScore {
        columns: cols,
        total_duration: total,
        meta,
    };
    let violations = validate(&score);
    if violations.is_empty() {
        Ok(score)
    } else {
        Err(EncodeError::Invalid(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyframe::EnergyParams;
    use crate::skeleton::synth::{realize, BodyPose, Direction};
    use nalgebra::Rotation3;
    use LabanDirection::*;
    use LabanLevel::*;

    fn sym(d: LabanDirection, l: LabanLevel) -> LabanSymbol {
        LabanSymbol::new(d, l)
    }

    #[test]
    fn digitize_examples() {
        assert_eq!(digitize(&Vector3::z()).unwrap(), sym(Place, High));
        assert_eq!(digitize(&Vector3::x()).unwrap(), sym(Forward, Middle));
        let c = 45f64.to_radians().cos();
        let s = 45f64.to_radians().sin();
        assert_eq!(
            digitize(&Vector3::new(c * c, c * s, s)).unwrap(),
            sym(LeftForward, High)
        );
        assert!(matches!(
            digitize(&Vector3::new(2.0, 0.0, 0.0)),
            Err(EncodeError::BadInput(_))
        ));
    }

    #[test]
    fn band_edges_are_lower_closed() {
        let dir = |az: f64, el: f64| Direction::new(az, el).unit();
        assert_eq!(digitize(&dir(22.5, 0.0)).unwrap().direction, LeftForward);
        assert_eq!(digitize(&dir(-22.5, 0.0)).unwrap().direction, Forward);
        assert_eq!(digitize(&dir(180.0, 0.0)).unwrap().direction, Backward);
        assert_eq!(
            digitize(&dir(-157.4, 0.0)).unwrap().direction,
            RightBackward
        );
        assert_eq!(digitize(&dir(0.0, 30.0)).unwrap().level, High);
        assert_eq!(digitize(&dir(0.0, -30.0)).unwrap().level, Low);
        assert_eq!(digitize(&dir(0.0, 70.0)).unwrap(), sym(Place, High));
        assert_eq!(digitize(&dir(0.0, -70.0)).unwrap(), sym(Place, Low));
    }

    #[test]
    fn segment_direction_in_body_frame() {
        let up = realize(
            &BodyPose {
                left: crate::skeleton::ArmPose {
                    upper: Direction::new(90.0, 0.0),
                    forearm: Direction::UP,
                },
                ..BodyPose::default()
            },
            0.0,
            0,
        )
        .unwrap();
        let v = segment_direction(&up, JointName::WristLeft).unwrap();
        assert!((v - Vector3::z()).norm() < 1e-12);

        let fwd = realize(&BodyPose::arms(Direction::DOWN, Direction::FORWARD), 0.0, 0).unwrap();
        let v = segment_direction(&fwd, JointName::WristRight).unwrap();
        assert!((v - Vector3::x()).norm() < 1e-12);

        let r = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let moved = fwd.transformed(r.matrix(), &Vector3::new(1.0, 2.0, -0.5));
        let w = segment_direction(&moved, JointName::WristRight).unwrap();
        assert!((w - v).norm() < 1e-12);
    }

    #[test]
    fn encode_pose_examples() {
        let cols = ColumnsMode::Arm.columns();
        let t = encode_pose(&realize(&BodyPose::t_pose(), 0.0, 0).unwrap(), &cols).unwrap();
        assert_eq!(t[&ColumnName::LeftArm], sym(Left, Middle));
        assert_eq!(t[&ColumnName::RightArm], sym(Right, Middle));
        assert_eq!(t[&ColumnName::Head], sym(Place, High));

        let down = encode_pose(&realize(&BodyPose::default(), 0.0, 0).unwrap(), &cols).unwrap();
        assert_eq!(down[&ColumnName::LeftArm], sym(Place, Low));
        assert_eq!(down[&ColumnName::RightArm], sym(Place, Low));
    }

    #[test]
    fn split_columns_use_each_segment() {
        let pose = BodyPose {
            right: crate::skeleton::ArmPose {
                upper: Direction::new(-90.0, 0.0),
                forearm: Direction::UP,
            },
            ..BodyPose::default()
        };
        let f = realize(&pose, 0.0, 0).unwrap();
        let s = encode_pose(&f, &ColumnsMode::Split.columns()).unwrap();
        assert_eq!(s[&ColumnName::RightUpperArm], sym(Right, Middle));
        assert_eq!(s[&ColumnName::RightForearm], sym(Place, High));
        let a = encode_pose(&f, &[ColumnName::RightArm]).unwrap();
        assert_eq!(a[&ColumnName::RightArm], sym(Place, High));
    }

    fn static_t_pose(n: usize) -> SkeletonSequence {
        let frames = (0..n)
            .map(|k| realize(&BodyPose::t_pose(), k as f64 / 30.0, k).unwrap())
            .collect();
        SkeletonSequence::new(frames, Some(30.0)).unwrap()
    }

    fn kfs(merged: Vec<usize>) -> KeyFrameSet {
        KeyFrameSet {
            per_part: BTreeMap::new(),
            merged,
            params: EnergyParams::default(),
        }
    }

    #[test]
    fn forced_key_frame_on_static_pose() {
        let seq = static_t_pose(60);
        let score = encode_sequence(&seq, &kfs(vec![59]), &ColumnsMode::Arm.columns()).unwrap();
        let left = score.column(ColumnName::LeftArm).unwrap();
        assert_eq!(left.cells.len(), 1);
        assert_eq!(left.cells[0].symbol, sym(Left, Middle));
        assert_eq!(left.cells[0].start, 0.0);
        assert_eq!(left.cells[0].duration, quantize_time(59.0 / 30.0));
        assert!(validate(&score).is_empty());
    }

    #[test]
    fn identical_key_poses_coalesce() {
        let seq = static_t_pose(60);
        let score = encode_sequence(&seq, &kfs(vec![20, 40]), &ColumnsMode::Arm.columns()).unwrap();
        let right = score.column(ColumnName::RightArm).unwrap();
        assert_eq!(right.cells.len(), 1);
        assert_eq!(right.cells[0].duration, quantize_time(40.0 / 30.0));
    }

    #[test]
    fn no_key_frames_is_an_error() {
        let seq = static_t_pose(10);
        assert!(matches!(
            encode_sequence(&seq, &kfs(vec![]), &ColumnsMode::Arm.columns()),
            Err(EncodeError::NoKeyFrames)
        ));
    }
}
