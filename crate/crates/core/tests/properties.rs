use std::collections::BTreeMap;

use nalgebra::Vector3;
use proptest::prelude::*;

use labanmotion::encoder::digitize;
use labanmotion::robot::{symbol_to_vector, vector_to_joints, JointPose, Segment};
use labanmotion::trajectory::{interpolate, InterpMode};

fn vector() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z))
        .prop_filter("nonzero", |v| v.norm() > 1e-3)
        .prop_map(|v| v.normalize())
}

fn limits() -> impl Strategy<Value = [f64; 2]> {
    (-180.0..180.0f64, 0.0..360.0f64).prop_map(|(lo, w)| [lo, (lo + w).min(180.0)])
}

proptest! {
    // Largest angle between a cell of the grid and its symbol's direction is
    // about 31.7 degrees (corner of a middle-level sector).
    #[test]
    fn digitized_symbol_points_near_the_vector(v in vector()) {
        let s = digitize(&v).unwrap();
        let c = symbol_to_vector(s).unwrap();
        let angle = (c.dot(&v) / v.norm()).clamp(-1.0, 1.0).acos().to_degrees();
        prop_assert!(angle < 32.0, "{s} is {angle} deg away");
    }

    #[test]
    fn joint_angles_respect_limits(v in vector(), yaw in limits(), pitch in limits(), has_yaw: bool) {
        let pitch = [pitch[0].clamp(-90.0, 90.0), pitch[1].clamp(-90.0, 90.0)];
        let seg = Segment {
            yaw_joint: has_yaw.then(|| "y".to_string()),
            pitch_joint: Some("p".into()),
            roll_joint: None,
            yaw_limits: yaw,
            pitch_limits: pitch,
        };
        let (y, p, _) = vector_to_joints(&v, &seg);
        let [ylo, yhi] = seg.effective_yaw_limits();
        prop_assert!(ylo <= y && y <= yhi);
        prop_assert!(pitch[0] <= p && p <= pitch[1]);
    }

    #[test]
    fn unclamped_joints_reproduce_the_direction(v in vector()) {
        let seg = Segment {
            yaw_joint: Some("y".into()),
            pitch_joint: Some("p".into()),
            roll_joint: None,
            yaw_limits: [-180.0, 180.0],
            pitch_limits: [-90.0, 90.0],
        };
        let (y, p, clamped) = vector_to_joints(&v, &seg);
        prop_assert!(!clamped);
        let (y, p) = (y.to_radians(), p.to_radians());
        let back = Vector3::new(p.cos() * y.cos(), p.cos() * y.sin(), p.sin());
        prop_assert!((back - v.normalize()).norm() < 1e-9);
    }

    #[test]
    fn linear_trajectory_stays_between_keys(
        values in prop::collection::vec(-90.0..90.0f64, 2..8),
        steps in prop::collection::vec(1u32..30, 7),
    ) {
        let rate = 30.0;
        let mut frame = 0;
        let keys: Vec<JointPose> = values.iter().zip(&steps).map(|(&v, &s)| {
            let t = frame as f64 / rate;
            frame += s;
            JointPose { t, angles: BTreeMap::from([("j".to_string(), v)]) }
        }).collect();
        let traj = interpolate(&keys, InterpMode::Linear, rate).unwrap();
        for s in &traj.samples {
            let i = keys.partition_point(|k| k.t <= s.t).clamp(1, keys.len() - 1);
            let (a, b) = (keys[i - 1].angles["j"], keys[i].angles["j"]);
            let x = s.angles["j"];
            prop_assert!(a.min(b) <= x && x <= a.max(b), "{x} outside [{a}, {b}] at {}", s.t);
        }
    }
}
