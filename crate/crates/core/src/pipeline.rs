//! Command implementations shared by the binary and the tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoder::{column_joint, encode_sequence, segment_direction, ColumnsMode, EncodeError};
use crate::keyframe::{detect_keyframes, EnergyParams, KeyFrameSet, PeakMode};
use crate::laban::{parse_score, serialize_score, states_at, LabanScore};
use crate::robot::{
    decode_detailed, retarget_frame, roundtrip, JointPose, RobotDescription, RoundtripReport,
};
use crate::skeleton::{load_sequence, resample, JointName, SkeletonSequence};
use crate::trajectory::{
    dict_update, synthesize, DictKey, InterpMode, MotionDictionary, State, Trajectory, DEFAULT_TAU,
};

/// Every tunable of the pipeline. Config files use these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub sigma: f64,
    pub prominence: f64,
    pub min_separation: f64,
    pub merge_window: f64,
    pub tracked_parts: Vec<JointName>,
    pub stop_speed: f64,
    pub peak_mode: PeakMode,
    pub force_final_keyframe: bool,
    pub columns: ColumnsMode,
    pub interp: InterpMode,
    /// Trajectory sample rate, Hz.
    pub rate: f64,
    pub tau: f64,
    pub robot: Option<String>,
    pub dict: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let e = EnergyParams::default();
        Self {
            sigma: e.sigma,
            prominence: e.prominence,
            min_separation: e.min_separation,
            merge_window: e.merge_window,
            tracked_parts: e.tracked_parts,
            stop_speed: e.stop_speed,
            peak_mode: PeakMode::Max,
            force_final_keyframe: false,
            columns: ColumnsMode::Arm,
            interp: InterpMode::Linear,
            rate: 100.0,
            tau: DEFAULT_TAU,
            robot: None,
            dict: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, StageError> {
        let cfg: Self = toml::from_str(text).map_err(|e| StageError::input("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StageError> {
        Self::from_toml(&read(path.as_ref(), "config")?)
    }

    pub fn energy(&self) -> EnergyParams {
        EnergyParams {
            sigma: self.sigma,
            prominence: self.prominence,
            min_separation: self.min_separation,
            merge_window: self.merge_window,
            tracked_parts: self.tracked_parts.clone(),
            stop_speed: self.stop_speed,
        }
    }

    pub fn validate(&self) -> Result<(), StageError> {
        self.energy()
            .validate()
            .map_err(|e| StageError::input("config", e))?;
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(StageError::input(
                "config",
                anyhow::anyhow!("rate must be > 0, got {}", self.rate),
            ));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(StageError::input(
                "config",
                anyhow::anyhow!("tau must be > 0, got {}", self.tau),
            ));
        }
        Ok(())
    }
}

/// Failure of one pipeline stage. `internal` marks broken invariants as
/// opposed to bad input.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source:#}")]
pub struct StageError {
    pub stage: &'static str,
    pub internal: bool,
    #[source]
    pub source: anyhow::Error,
}

impl StageError {
    pub fn input(stage: &'static str, e: impl Into<anyhow::Error>) -> Self {
        Self {
            stage,
            internal: false,
            source: e.into(),
        }
    }

    pub fn internal(stage: &'static str, e: impl Into<anyhow::Error>) -> Self {
        Self {
            stage,
            internal: true,
            source: e.into(),
        }
    }

    /// 1 for bad input, 2 for internal errors.
    pub fn exit_code(&self) -> u8 {
        if self.internal {
            2
        } else {
            1
        }
    }
}

fn read(path: &Path, stage: &'static str) -> Result<String, StageError> {
    fs::read_to_string(path).map_err(|e| {
        StageError::input(
            stage,
            anyhow::anyhow!("cannot read {}: {e}", path.display()),
        )
    })
}

pub fn write(path: &Path, text: &str, stage: &'static str) -> Result<(), StageError> {
    fs::write(path, text).map_err(|e| {
        StageError::input(
            stage,
            anyhow::anyhow!("cannot write {}: {e}", path.display()),
        )
    })
}

fn timed<T>(stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    log::info!("{stage}: {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
    out
}

pub fn load_skeleton(path: &Path) -> Result<SkeletonSequence, StageError> {
    let seq = load_sequence(path).map_err(|e| StageError::input("load", e))?;
    log::info!(
        "load: {} frames at {:.3} Hz from {}",
        seq.len(),
        seq.sample_rate,
        path.display()
    );
    Ok(seq)
}

pub fn load_robot(arg: &str) -> Result<RobotDescription, StageError> {
    RobotDescription::load_or_builtin(arg).map_err(|e| StageError::input("robot", e))
}

pub fn load_score(path: &Path) -> Result<LabanScore, StageError> {
    parse_score(&read(path, "score")?).map_err(|e| StageError::input("score", e))
}

/// Resamples onto the mean rate when timestamps are not uniform.
pub fn uniform(seq: SkeletonSequence) -> Result<SkeletonSequence, StageError> {
    if seq.is_uniform(1e-6) {
        return Ok(seq);
    }
    log::info!("resampling non-uniform input to {:.3} Hz", seq.sample_rate);
    resample(&seq, seq.sample_rate).map_err(|e| StageError::input("resample", e))
}

pub fn keyframes(seq: &SkeletonSequence, cfg: &PipelineConfig) -> Result<KeyFrameSet, StageError> {
    timed("keyframes", || {
        let mut kfs = detect_keyframes(seq, &cfg.energy(), cfg.peak_mode)
            .map_err(|e| StageError::input("keyframes", e))?;
        if cfg.force_final_keyframe {
            kfs.force_final(seq.len(), seq.sample_rate);
        }
        log::info!("keyframes: {} merged", kfs.merged.len());
        Ok(kfs)
    })
}

#[derive(Serialize)]
struct KeyFrameRecord {
    frame: usize,
    t: f64,
}

#[derive(Serialize)]
struct KeyFrameReport {
    sample_rate: f64,
    frames: usize,
    per_part: BTreeMap<String, Vec<KeyFrameRecord>>,
    merged: Vec<KeyFrameRecord>,
}

pub fn keyframes_json(seq: &SkeletonSequence, kfs: &KeyFrameSet) -> String {
    let t0 = seq.start_time();
    let rec = |&k: &usize| KeyFrameRecord {
        frame: k,
        t: seq.frames()[k].timestamp - t0,
    };
    let report = KeyFrameReport {
        sample_rate: seq.sample_rate,
        frames: seq.len(),
        per_part: kfs
            .per_part
            .iter()
            .map(|(p, ks)| (p.to_string(), ks.iter().map(rec).collect()))
            .collect(),
        merged: kfs.merged.iter().map(rec).collect(),
    };
    let mut s = serde_json::to_string_pretty(&report).expect("keyframe report serialization");
    s.push('\n');
    s
}

pub fn encode(
    seq: &SkeletonSequence,
    cfg: &PipelineConfig,
) -> Result<(KeyFrameSet, LabanScore), StageError> {
    let kfs = keyframes(seq, cfg)?;
    let score = timed("encode", || {
        encode_sequence(seq, &kfs, &cfg.columns.columns())
    })
    .map_err(|e| match e {
        EncodeError::Invalid(_) => StageError::internal("encode", e),
        other => StageError::input("encode", other),
    })?;
    log::info!(
        "encode: {} cells over {:.3} s",
        score.columns.iter().map(|c| c.cells.len()).sum::<usize>(),
        score.total_duration
    );
    Ok((kfs, score))
}

/// Decoded key poses preceded by the neutral pose at time zero, with the
/// score state at each.
pub fn key_poses(
    score: &LabanScore,
    robot: &RobotDescription,
) -> Result<(Vec<JointPose>, Vec<State>), StageError> {
    let decoded = decode_detailed(score, robot).map_err(|e| StageError::input("decode", e))?;
    let mut poses = Vec::with_capacity(decoded.len() + 1);
    if decoded
        .first()
        .is_none_or(|d| d.pose.t > crate::trajectory::SNAP_EPS)
    {
        poses.push(JointPose {
            t: 0.0,
            angles: robot.neutral_angles(),
        });
    }
    poses.extend(decoded.into_iter().map(|d| d.pose));
    let states = poses
        .iter()
        .map(|p| {
            states_at(score, p.t.min(score.total_duration))
                .map_err(|e| StageError::internal("decode", e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((poses, states))
}

pub fn trajectory(
    score: &LabanScore,
    robot: &RobotDescription,
    dict: Option<&MotionDictionary>,
    cfg: &PipelineConfig,
) -> Result<Trajectory, StageError> {
    let (poses, states) = key_poses(score, robot)?;
    log::info!("decode: {} key poses", poses.len());
    let empty = MotionDictionary::default();
    let mut traj = timed("trajectory", || {
        synthesize(
            &poses,
            &states,
            dict.unwrap_or(&empty),
            cfg.interp,
            cfg.rate,
        )
    })
    .map_err(|e| StageError::input("trajectory", e))?;
    traj.clamp_to(robot);
    log::info!(
        "trajectory: {} samples at {} Hz",
        traj.samples.len(),
        traj.rate
    );
    Ok(traj)
}

pub fn load_dict(cfg: &PipelineConfig) -> Result<Option<MotionDictionary>, StageError> {
    cfg.dict
        .as_ref()
        .map(|p| MotionDictionary::load(p).map_err(|e| StageError::input("dict", e)))
        .transpose()
}

/// Joint angles of every frame, retargeted from continuous segment
/// directions of the score's columns.
pub fn retarget_clip(
    seq: &SkeletonSequence,
    score: &LabanScore,
    robot: &RobotDescription,
) -> Result<Vec<JointPose>, StageError> {
    let t0 = seq.start_time();
    let mut hist = BTreeMap::new();
    seq.frames()
        .iter()
        .map(|f| {
            let dirs = score
                .columns
                .iter()
                .map(|c| Ok((c.name, segment_direction(f, column_joint(c.name))?)))
                .collect::<Result<BTreeMap<_, _>, EncodeError>>()
                .map_err(|e| StageError::input("retarget", e))?;
            Ok(JointPose {
                t: f.timestamp - t0,
                angles: retarget_frame(&dirs, robot, &mut hist),
            })
        })
        .collect()
}

/// Adds every key-pose transition of one clip to `dict`.
pub fn observe_clip(
    dict: &mut MotionDictionary,
    seq: &SkeletonSequence,
    robot: &RobotDescription,
    cfg: &PipelineConfig,
) -> Result<usize, StageError> {
    let (_, score) = encode(seq, cfg)?;
    let (poses, states) = key_poses(&score, robot)?;
    let observed = retarget_clip(seq, &score, robot)?;
    let frame_of = |t: f64| ((t * seq.sample_rate).round() as usize).min(observed.len() - 1);
    let mut added = 0;
    for i in 0..poses.len() - 1 {
        let (a, b) = (frame_of(poses[i].t), frame_of(poses[i + 1].t));
        if b <= a {
            continue;
        }
        let key = DictKey {
            from: states[i].clone(),
            to: states[i + 1].clone(),
        };
        dict_update(dict, key, &observed[a..=b]).map_err(|e| StageError::input("dict", e))?;
        added += 1;
    }
    Ok(added)
}

/// Builds a dictionary from clips, visited in lexicographic path order.
pub fn build_dictionary(
    paths: &[PathBuf],
    robot: &RobotDescription,
    cfg: &PipelineConfig,
) -> Result<MotionDictionary, StageError> {
    let mut dict = MotionDictionary::new(cfg.tau).map_err(|e| StageError::input("dict", e))?;
    let mut sorted = paths.to_vec();
    sorted.sort();
    for p in &sorted {
        let seq = uniform(load_skeleton(p)?)?;
        let n = observe_clip(&mut dict, &seq, robot, cfg)?;
        log::info!("dict: {n} transitions from {}", p.display());
    }
    Ok(dict)
}

pub fn cmd_roundtrip(score_path: &Path, robot_arg: &str) -> Result<RoundtripReport, StageError> {
    let score = load_score(score_path)?;
    let robot = load_robot(robot_arg)?;
    roundtrip(&score, &robot).map_err(|e| StageError::input("roundtrip", e))
}

pub fn roundtrip_text(report: &RoundtripReport) -> String {
    let mut s = format!(
        "robot {}: {}/{} compared cells match, {} clamped\n",
        report.robot,
        report.matched,
        report.compared,
        report.clamped.len()
    );
    for c in &report.clamped {
        s.push_str(&format!("clamped {c}\n"));
    }
    for c in &report.cells {
        if let crate::robot::CellOutcome::Mismatch { decoded } = &c.outcome {
            s.push_str(&format!(
                "mismatch {}[{}] {} decoded as {decoded}\n",
                c.column, c.cell, c.symbol
            ));
        }
    }
    s
}

/// Everything one pipeline run produced.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub keyframes: String,
    pub score: LabanScore,
    pub trajectory: Trajectory,
    pub report: RoundtripReport,
}

pub fn cmd_pipeline(
    skeleton: &Path,
    robot_arg: &str,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, StageError> {
    cfg.validate()?;
    let seq = uniform(load_skeleton(skeleton)?)?;
    let robot = load_robot(robot_arg)?;
    let dict = load_dict(cfg)?;
    let (kfs, score) = encode(&seq, cfg)?;
    let trajectory = trajectory(&score, &robot, dict.as_ref(), cfg)?;
    let report = roundtrip(&score, &robot).map_err(|e| StageError::input("roundtrip", e))?;
    Ok(PipelineOutput {
        keyframes: keyframes_json(&seq, &kfs),
        score,
        trajectory,
        report,
    })
}

/// Writes `keyframes.json`, `score.json`, `trajectory.csv` and
/// `report.json` into `dir`.
pub fn write_pipeline(out: &PipelineOutput, dir: &Path) -> Result<(), StageError> {
    fs::create_dir_all(dir).map_err(|e| {
        StageError::input(
            "output",
            anyhow::anyhow!("cannot create {}: {e}", dir.display()),
        )
    })?;
    write(&dir.join("keyframes.json"), &out.keyframes, "output")?;
    let score = serialize_score(&out.score).map_err(|e| StageError::internal("output", e))?;
    write(&dir.join("score.json"), &score, "output")?;
    let csv = out
        .trajectory
        .to_csv()
        .map_err(|e| StageError::internal("output", e))?;
    write(&dir.join("trajectory.csv"), &csv, "output")?;
    let mut report =
        serde_json::to_string_pretty(&out.report).map_err(|e| StageError::internal("output", e))?;
    report.push('\n');
    write(&dir.join("report.json"), &report, "output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(PipelineConfig::from_toml("sigma = 0.2\ncolumns = \"split\"").is_ok());
        let e = PipelineConfig::from_toml("sigmaa = 0.2").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(PipelineConfig::from_toml("rate = -1.0").is_err());
        let cfg = PipelineConfig::from_toml("interp = \"cubic\"\ntracked_parts = [\"WristRight\"]")
            .unwrap();
        assert_eq!(cfg.interp, InterpMode::Cubic);
        assert_eq!(cfg.energy().tracked_parts, vec![JointName::WristRight]);
    }
}
