use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{JointName, Result, SkeletonError, SkeletonFrame, SkeletonSequence};

#[derive(Serialize, Deserialize)]
struct RawSequence {
    #[serde(default)]
    sample_rate_hint: Option<f64>,
    frames: Vec<RawFrame>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    t: f64,
    joints: BTreeMap<String, [f64; 3]>,
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<SkeletonSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SkeletonError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_sequence(&text)
}

/// Parses the skeleton JSON format. Joints outside the tracked upper-body
/// set (hips, knees, ...) are ignored.
pub fn parse_sequence(text: &str) -> Result<SkeletonSequence> {
    let raw: RawSequence = serde_json::from_str(text)?;
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (index, rf) in raw.frames.into_iter().enumerate() {
        let mut positions = [Vector3::zeros(); JointName::COUNT];
        for joint in JointName::ALL {
            let c = rf
                .joints
                .get(joint.as_str())
                .ok_or(SkeletonError::MalformedFrame { index, joint })?;
            positions[joint.index()] = Vector3::new(c[0], c[1], c[2]);
        }
        frames.push(SkeletonFrame::new(rf.t, positions, index)?);
    }
    SkeletonSequence::new(frames, raw.sample_rate_hint)
}

pub fn sequence_to_json(seq: &SkeletonSequence) -> String {
    let raw = RawSequence {
        sample_rate_hint: seq.is_uniform(1e-9).then_some(seq.sample_rate),
        frames: seq
            .frames()
            .iter()
            .map(|f| RawFrame {
                t: f.timestamp,
                joints: JointName::ALL
                    .iter()
                    .map(|j| {
                        let p = f.position(*j);
                        (j.as_str().to_string(), [p.x, p.y, p.z])
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&raw).expect("skeleton serialization");
    s.push('\n');
    s
}

pub fn save_sequence(seq: &SkeletonSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, sequence_to_json(seq)).map_err(|source| SkeletonError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::tests::t_pose;

    fn frame_json(t: f64, skip: Option<JointName>) -> String {
        let f = t_pose(t);
        let joints: Vec<String> = JointName::ALL
            .iter()
            .filter(|j| Some(**j) != skip)
            .map(|j| {
                let p = f.position(*j);
                format!("\"{}\": [{}, {}, {}]", j, p.x, p.y, p.z)
            })
            .collect();
        format!("{{\"t\": {t}, \"joints\": {{{}}}}}", joints.join(", "))
    }

    #[test]
    fn loads_two_frames() {
        let text = format!(
            "{{\"sample_rate_hint\": null, \"frames\": [{}, {}]}}",
            frame_json(0.0, None),
            frame_json(0.1, None)
        );
        let seq = parse_sequence(&text).unwrap();
        assert_eq!(seq.len(), 2);
        assert!((seq.sample_rate - 10.0).abs() < 1e-9);
    }

    #[test]
    fn missing_joint_is_reported_with_index() {
        let text = format!(
            "{{\"frames\": [{}, {}]}}",
            frame_json(0.0, None),
            frame_json(0.1, Some(JointName::WristLeft))
        );
        match parse_sequence(&text) {
            Err(SkeletonError::MalformedFrame { index, joint }) => {
                assert_eq!((index, joint), (1, JointName::WristLeft));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equal_timestamps_rejected() {
        let text = format!(
            "{{\"frames\": [{}, {}]}}",
            frame_json(0.0, None),
            frame_json(0.0, None)
        );
        assert!(matches!(
            parse_sequence(&text),
            Err(SkeletonError::TimeOrder(1))
        ));
    }

    #[test]
    fn extra_joints_ignored() {
        let text = "{\"frames\": [".to_string()
            + &frame_json(0.0, None).replacen(
                "\"joints\": {",
                "\"joints\": {\"KneeLeft\": [0, 0, 0.5], ",
                1,
            )
            + "]}";
        assert_eq!(parse_sequence(&text).unwrap().len(), 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let frames: Vec<_> = (0..5)
            .map(|k| {
                let mut p = *t_pose(0.0).positions();
                p[JointName::WristLeft.index()].x += 0.1 * (k as f64).sqrt();
                SkeletonFrame::new(k as f64 / 30.0, p, k).unwrap()
            })
            .collect();
        let seq = SkeletonSequence::new(frames, Some(30.0)).unwrap();
        let back = parse_sequence(&sequence_to_json(&seq)).unwrap();
        assert_eq!(back, seq);
    }
}
