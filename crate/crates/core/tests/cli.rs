mod common;

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labanmotion"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, pattern: &str) -> std::path::PathBuf {
    let out = dir.join(format!("{pattern}.json"));
    let o = run(&["synth", pattern, "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    out
}

#[test]
fn roundtrip_of_golden_score_succeeds() {
    let score = common::golden_dir().join("frontal.json");
    let o = run(&["roundtrip", p(&score), "--robot", "7dof"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("7/7 compared cells match"));
}

#[test]
fn roundtrip_reports_clamped_backward_cell() {
    let score = common::golden_dir().join("backward.json");
    let o = run(&["roundtrip", p(&score), "--robot", "7dof"]);
    assert_eq!(code(&o), 0);
    assert!(text(&o.stdout).contains("clamped RightArm[1] Backward:Middle"));
}

#[test]
fn corrupt_score_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"columns\": [").unwrap();
    let o = run(&["roundtrip", p(&bad), "--robot", "7dof"]);
    assert_eq!(code(&o), 1);
    assert!(
        text(&o.stderr).contains("parse error"),
        "{}",
        text(&o.stderr)
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "sigmaa = 0.2\n").unwrap();
    let score = common::golden_dir().join("frontal.json");
    let o = run(&[
        "--config",
        p(&cfg),
        "roundtrip",
        p(&score),
        "--robot",
        "7dof",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_robot_and_bad_flags_exit_one() {
    let score = common::golden_dir().join("frontal.json");
    assert_eq!(code(&run(&["roundtrip", p(&score), "--robot", "11dof"])), 1);
    assert_eq!(code(&run(&["roundtrip", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn static_clip_needs_forced_final_keyframe() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), "static");
    let out = dir.path().join("out");
    let o = run(&["pipeline", p(&clip), "--robot", "7dof", "-o", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(
        text(&o.stderr).to_lowercase().contains("key frame"),
        "{}",
        text(&o.stderr)
    );

    let o = run(&[
        "pipeline",
        p(&clip),
        "--robot",
        "7dof",
        "--force-final-keyframe",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,"));
}

#[test]
fn pipeline_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), "reach_sequence");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "pipeline",
            p(&clip),
            "--robot",
            "9dof",
            "--interp",
            "cubic",
            "-o",
            p(out),
        ]);
        assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    }
    for f in [
        "keyframes.json",
        "score.json",
        "trajectory.csv",
        "report.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn encode_then_decode_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), "move_hold_move");
    let score = dir.path().join("score.json");
    let o = run(&["encode", p(&clip), "--columns", "split", "-o", p(&score)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let o = run(&["decode", p(&score), "--robot", "7dof", "--rate", "50"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = text(&o.stdout);
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,") && header.contains("r_sh_yaw"));
    let o = run(&["keyframes", p(&clip)]);
    assert_eq!(code(&o), 0);
    let kf: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(kf.is_object());
}

#[test]
fn dictionary_build_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), "reach_sequence");
    let dict = dir.path().join("dict.json");
    let o = run(&[
        "dict",
        "build",
        p(&clip),
        p(&clip),
        "--robot",
        "7dof",
        "-o",
        p(&dict),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let o = run(&["dict", "stats", p(&dict)]);
    assert_eq!(code(&o), 0);
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(stats.is_object());

    let score = dir.path().join("score.json");
    assert_eq!(code(&run(&["encode", p(&clip), "-o", p(&score)])), 0);
    let o = run(&["decode", p(&score), "--robot", "7dof", "--dict", p(&dict)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
}
