//! Decoded joint angles for the hand-written scores, computed by hand.

mod common;

use approx::assert_abs_diff_eq;

use labanmotion::laban::parse_score;
use labanmotion::robot::{decode_score, roundtrip, JointPose, RobotDescription};

fn decode(file: &str, robot: &str) -> Vec<JointPose> {
    let text = std::fs::read_to_string(common::golden_dir().join(file)).unwrap();
    let score = parse_score(&text).unwrap();
    decode_score(&score, &RobotDescription::builtin(robot).unwrap()).unwrap()
}

fn check(poses: &[JointPose], expected: &[(f64, &[(&str, f64)])]) {
    assert_eq!(poses.len(), expected.len());
    for (pose, (t, angles)) in poses.iter().zip(expected) {
        assert_abs_diff_eq!(pose.t, *t, epsilon = 1e-12);
        for (joint, want) in *angles {
            assert_abs_diff_eq!(pose.angles[*joint], *want, epsilon = 1e-9);
        }
    }
}

#[test]
fn frontal_on_seven_dof() {
    let poses = decode("frontal.json", "7dof");
    #[rustfmt::skip]
    let expected: [(f64, &[(&str, f64)]); 4] = [
        (1.0, &[("r_sh_yaw", 0.0), ("r_sh_pitch", 0.0), ("l_sh_yaw", 0.0), ("l_sh_pitch", -90.0), ("head_yaw", 0.0), ("head_pitch", 90.0)]),
        (2.0, &[("r_sh_yaw", -45.0), ("r_sh_pitch", 45.0), ("l_sh_yaw", 0.0), ("l_sh_pitch", -90.0), ("head_yaw", 0.0), ("head_pitch", 90.0)]),
        (3.0, &[("r_sh_yaw", -90.0), ("r_sh_pitch", -45.0), ("l_sh_yaw", 45.0), ("l_sh_pitch", 0.0), ("head_yaw", 0.0), ("head_pitch", 90.0)]),
        (4.0, &[("r_sh_yaw", 0.0), ("r_sh_pitch", 90.0), ("l_sh_yaw", 45.0), ("l_sh_pitch", 0.0), ("head_yaw", 0.0), ("head_pitch", 90.0)]),
    ];
    check(&poses, &expected);
    for p in &poses {
        assert_eq!(p.angles["r_wrist_roll"], 0.0);
        assert_eq!(p.angles.len(), 7);
    }
}

#[test]
fn frontal_on_nine_dof_holds_waist_neutral() {
    let poses = decode("frontal.json", "9dof");
    assert_eq!(poses.len(), 4);
    for p in &poses {
        assert_eq!(p.angles["waist_yaw"], 0.0);
        assert_eq!(p.angles.len(), 9);
    }
    assert_abs_diff_eq!(poses[2].angles["r_shoulder_yaw"], -90.0, epsilon = 1e-9);
    assert_abs_diff_eq!(poses[2].angles["l_shoulder_yaw"], 45.0, epsilon = 1e-9);
}

#[test]
fn split_columns_merge_onto_one_segment() {
    let poses = decode("split.json", "7dof");
    #[rustfmt::skip]
    let expected: [(f64, &[(&str, f64)]); 2] = [
        (0.75, &[("l_sh_yaw", 90.0), ("l_sh_pitch", 0.0), ("r_sh_yaw", 0.0), ("r_sh_pitch", 0.0), ("head_yaw", 0.0), ("head_pitch", 90.0)]),
        // Forward + Backward cancels; the previous direction stands.
        (1.5, &[("l_sh_yaw", 90.0), ("l_sh_pitch", 45.0), ("r_sh_yaw", 0.0), ("r_sh_pitch", 0.0), ("head_yaw", 0.0), ("head_pitch", -45.0)]),
    ];
    check(&poses, &expected);
}

#[test]
fn backward_gesture_is_clamped_and_reported() {
    let text = std::fs::read_to_string(common::golden_dir().join("backward.json")).unwrap();
    let score = parse_score(&text).unwrap();
    let robot = RobotDescription::builtin("7dof").unwrap();
    let poses = decode_score(&score, &robot).unwrap();
    // Backward is equidistant from both yaw limits; the lower one wins.
    assert_abs_diff_eq!(poses[1].angles["r_sh_yaw"], -90.0, epsilon = 1e-9);
    let report = roundtrip(&score, &robot).unwrap();
    assert!(report.passed());
    assert_eq!(
        report.clamped,
        vec!["RightArm[1] Backward:Middle".to_string()]
    );

    let wide = RobotDescription::builtin("9dof").unwrap();
    let report = roundtrip(&score, &wide).unwrap();
    assert!(report.clamped.is_empty());
    assert_eq!(report.matched, report.compared);
}
