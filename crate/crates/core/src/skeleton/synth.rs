//! Deterministic synthetic skeleton motion for tests and demos.
//!
//! The torso is fixed and upright, facing world +X with its left side along
//! world +Y, so body-frame and world-frame directions coincide. Arms are
//! posed by the directions of the upper arm and forearm; moves rotate each
//! segment along the great circle between its endpoint directions with a
//! trapezoidal progress profile.

use std::path::Path;

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointName, Result, SkeletonError, SkeletonFrame, SkeletonSequence};

pub const UPPER_ARM_LENGTH: f64 = 0.30;
pub const FOREARM_LENGTH: f64 = 0.27;
pub const HAND_LENGTH: f64 = 0.08;
const HEAD_LENGTH: f64 = 0.14;

/// Direction in body coordinates; degrees, azimuth counter-clockwise from
/// forward toward left, elevation up from the horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub const UP: Direction = Direction::new(0.0, 90.0);
    pub const DOWN: Direction = Direction::new(0.0, -90.0);
    pub const FORWARD: Direction = Direction::new(0.0, 0.0);

    pub fn unit(&self) -> Vector3<f64> {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub upper: Direction,
    pub forearm: Direction,
}

impl ArmPose {
    /// Straight arm pointing along `dir`.
    pub const fn straight(dir: Direction) -> Self {
        Self {
            upper: dir,
            forearm: dir,
        }
    }
}

impl Default for ArmPose {
    fn default() -> Self {
        ArmPose::straight(Direction::DOWN)
    }
}

fn default_head() -> Direction {
    Direction::UP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    #[serde(default)]
    pub left: ArmPose,
    #[serde(default)]
    pub right: ArmPose,
    #[serde(default = "default_head")]
    pub head: Direction,
}

impl Default for BodyPose {
    fn default() -> Self {
        Self {
            left: ArmPose::default(),
            right: ArmPose::default(),
            head: Direction::UP,
        }
    }
}

impl BodyPose {
    pub fn arms(left: Direction, right: Direction) -> Self {
        Self {
            left: ArmPose::straight(left),
            right: ArmPose::straight(right),
            head: Direction::UP,
        }
    }

    pub fn t_pose() -> Self {
        Self::arms(Direction::new(90.0, 0.0), Direction::new(-90.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Limb {
    LeftArm,
    RightArm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachStep {
    pub pose: BodyPose,
    pub dwell: f64,
}

fn default_move() -> f64 {
    1.0
}
fn default_mhm_move() -> f64 {
    0.8
}
fn default_rest() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum MotionPattern {
    Static {
        duration: f64,
        #[serde(default)]
        pose: BodyPose,
    },
    /// Rest at `from`, reach `to`, hold, return to `from`, rest. The reach
    /// ends and the return starts abruptly; leaving and re-entering the
    /// rest pose is gentler.
    MoveHoldMove {
        part: Limb,
        from: ArmPose,
        to: ArmPose,
        hold: f64,
        #[serde(default = "default_mhm_move")]
        move_duration: f64,
        #[serde(default = "default_rest")]
        rest: f64,
    },
    /// Dwell at each pose in turn, moving between consecutive poses at
    /// constant speed apart from short start/stop ramps.
    ReachSequence {
        steps: Vec<ReachStep>,
        #[serde(default = "default_move")]
        move_duration: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rate: f64,
    #[serde(flatten)]
    pub pattern: MotionPattern,
}

impl SynthSpec {
    /// Built-in descriptor for a pattern name, with default parameters.
    pub fn preset(name: &str, rate: f64) -> Result<Self> {
        let forward = Direction::FORWARD;
        let pattern = match name {
            "static" => MotionPattern::Static {
                duration: 2.0,
                pose: BodyPose::default(),
            },
            "move_hold_move" => MotionPattern::MoveHoldMove {
                part: Limb::RightArm,
                from: ArmPose::straight(Direction::DOWN),
                to: ArmPose::straight(forward),
                hold: 0.5,
                move_duration: default_mhm_move(),
                rest: default_rest(),
            },
            "reach_sequence" => MotionPattern::ReachSequence {
                steps: vec![
                    ReachStep {
                        pose: BodyPose::default(),
                        dwell: 0.6,
                    },
                    ReachStep {
                        pose: BodyPose::arms(Direction::DOWN, forward),
                        dwell: 0.6,
                    },
                    ReachStep {
                        pose: BodyPose::arms(
                            Direction::new(45.0, 45.0),
                            Direction::new(-90.0, 0.0),
                        ),
                        dwell: 0.6,
                    },
                ],
                move_duration: default_move(),
            },
            other => {
                return Err(SkeletonError::BadDescriptor(format!(
                    "unknown pattern `{other}`"
                )))
            }
        };
        Ok(Self { rate, pattern })
    }

    /// Reads a JSON descriptor file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SkeletonError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| SkeletonError::BadDescriptor(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Hold,
    Move,
}

/// One interval of a synthetic timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: f64,
    pub end: f64,
    from: BodyPose,
    to: BodyPose,
    ramp_in: f64,
    ramp_out: f64,
}

/// Piecewise description of a synthetic motion in continuous time.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub phases: Vec<Phase>,
}

impl Timeline {
    pub fn duration(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.end)
    }

    /// `(start, end)` of every hold phase.
    pub fn plateaus(&self) -> Vec<(f64, f64)> {
        self.intervals(PhaseKind::Hold)
    }

    pub fn moves(&self) -> Vec<(f64, f64)> {
        self.intervals(PhaseKind::Move)
    }

    fn intervals(&self, kind: PhaseKind) -> Vec<(f64, f64)> {
        self.phases
            .iter()
            .filter(|p| p.kind == kind)
            .map(|p| (p.start, p.end))
            .collect()
    }

    pub fn pose_at(&self, t: f64) -> BodyPose {
        let phase = self
            .phases
            .iter()
            .find(|p| t < p.end)
            .or(self.phases.last())
            .expect("timeline has phases");
        match phase.kind {
            PhaseKind::Hold => phase.from,
            PhaseKind::Move => {
                let s = trapezoid(
                    (t - phase.start) / (phase.end - phase.start),
                    phase.ramp_in / (phase.end - phase.start),
                    phase.ramp_out / (phase.end - phase.start),
                );
                blend_pose(&phase.from, &phase.to, s)
            }
        }
    }

    fn push_hold(&mut self, pose: BodyPose, duration: f64) {
        let start = self.duration();
        self.phases.push(Phase {
            kind: PhaseKind::Hold,
            start,
            end: start + duration,
            from: pose,
            to: pose,
            ramp_in: 0.0,
            ramp_out: 0.0,
        });
    }

    fn push_move(&mut self, from: BodyPose, to: BodyPose, duration: f64, ramps: (f64, f64)) {
        let start = self.duration();
        self.phases.push(Phase {
            kind: PhaseKind::Move,
            start,
            end: start + duration,
            from,
            to,
            ramp_in: ramps.0,
            ramp_out: ramps.1,
        });
    }
}

const SHORT_RAMP: f64 = 0.05;
const LONG_RAMP: f64 = 0.25;

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SkeletonError::BadDescriptor(format!(
            "{what} must be positive, got {v}"
        )))
    }
}

pub fn synth_timeline(pattern: &MotionPattern) -> Result<Timeline> {
    let mut tl = Timeline { phases: Vec::new() };
    match pattern {
        MotionPattern::Static { duration, pose } => {
            check_positive("duration", *duration)?;
            tl.push_hold(*pose, *duration);
        }
        MotionPattern::MoveHoldMove {
            part,
            from,
            to,
            hold,
            move_duration,
            rest,
        } => {
            check_positive("hold", *hold)?;
            check_positive("rest", *rest)?;
            check_positive("move_duration", *move_duration)?;
            if *move_duration < LONG_RAMP + SHORT_RAMP {
                return Err(SkeletonError::BadDescriptor(format!(
                    "move_duration must be at least {}",
                    LONG_RAMP + SHORT_RAMP
                )));
            }
            let mut a = BodyPose::default();
            let mut b = BodyPose::default();
            match part {
                Limb::LeftArm => {
                    a.left = *from;
                    b.left = *to;
                }
                Limb::RightArm => {
                    a.right = *from;
                    b.right = *to;
                }
            }
            tl.push_hold(a, *rest);
            tl.push_move(a, b, *move_duration, (LONG_RAMP, SHORT_RAMP));
            tl.push_hold(b, *hold);
            tl.push_move(b, a, *move_duration, (SHORT_RAMP, LONG_RAMP));
            tl.push_hold(a, *rest);
        }
        MotionPattern::ReachSequence {
            steps,
            move_duration,
        } => {
            if steps.is_empty() {
                return Err(SkeletonError::BadDescriptor(
                    "reach_sequence needs at least one step".into(),
                ));
            }
            check_positive("move_duration", *move_duration)?;
            if *move_duration < 2.0 * SHORT_RAMP {
                return Err(SkeletonError::BadDescriptor(format!(
                    "move_duration must be at least {}",
                    2.0 * SHORT_RAMP
                )));
            }
            for (i, step) in steps.iter().enumerate() {
                check_positive("dwell", step.dwell)?;
                if i > 0 {
                    tl.push_move(
                        steps[i - 1].pose,
                        step.pose,
                        *move_duration,
                        (SHORT_RAMP, SHORT_RAMP),
                    );
                }
                tl.push_hold(step.pose, step.dwell);
            }
        }
    }
    Ok(tl)
}

/// Samples the described motion at `k / rate` for `k < round(duration * rate)`.
pub fn synth_motion(spec: &SynthSpec) -> Result<SkeletonSequence> {
    check_positive("rate", spec.rate)?;
    let tl = synth_timeline(&spec.pattern)?;
    let count = (tl.duration() * spec.rate).round() as usize;
    if count == 0 {
        return Err(SkeletonError::BadDescriptor(
            "motion shorter than one sample".into(),
        ));
    }
    let frames = (0..count)
        .map(|k| {
            let t = k as f64 / spec.rate;
            realize(&tl.pose_at(t), t, k)
        })
        .collect::<Result<Vec<_>>>()?;
    SkeletonSequence::new(frames, Some(spec.rate))
}

/// Joint positions for a body pose on the fixed synthetic torso.
pub fn realize(pose: &BodyPose, t: f64, index: usize) -> Result<SkeletonFrame> {
    let mut p = [Vector3::zeros(); JointName::COUNT];
    let mut set = |j: JointName, v: Vector3<f64>| p[j.index()] = v;
    let neck = Vector3::new(0.0, 0.0, 1.58);
    set(JointName::SpineBase, Vector3::new(0.0, 0.0, 1.0));
    set(JointName::SpineShoulder, Vector3::new(0.0, 0.0, 1.5));
    set(JointName::Neck, neck);
    set(JointName::Head, neck + pose.head.unit() * HEAD_LENGTH);

    let arms = [
        (
            &pose.left,
            Vector3::new(0.0, 0.18, 1.45),
            [
                JointName::ShoulderLeft,
                JointName::ElbowLeft,
                JointName::WristLeft,
                JointName::HandLeft,
            ],
        ),
        (
            &pose.right,
            Vector3::new(0.0, -0.18, 1.45),
            [
                JointName::ShoulderRight,
                JointName::ElbowRight,
                JointName::WristRight,
                JointName::HandRight,
            ],
        ),
    ];
    for (arm, shoulder, [js, je, jw, jh]) in arms {
        let elbow = shoulder + arm.upper.unit() * UPPER_ARM_LENGTH;
        let fore = arm.forearm.unit();
        let wrist = elbow + fore * FOREARM_LENGTH;
        set(js, shoulder);
        set(je, elbow);
        set(jw, wrist);
        set(jh, wrist + fore * HAND_LENGTH);
    }
    SkeletonFrame::new(t, p, index)
}

/// Progress in [0, 1] for normalized time `u` with linear speed ramps of
/// normalized lengths `a` (start) and `b` (end) and constant speed between.
fn trapezoid(u: f64, a: f64, b: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let vmax = 1.0 / (1.0 - 0.5 * a - 0.5 * b);
    if u < a {
        vmax * u * u / (2.0 * a)
    } else if u <= 1.0 - b {
        vmax * (0.5 * a + (u - a))
    } else {
        let r = 1.0 - u;
        1.0 - vmax * r * r / (2.0 * b)
    }
}

fn blend_pose(a: &BodyPose, b: &BodyPose, s: f64) -> BodyPose {
    let arm = |x: &ArmPose, y: &ArmPose| ArmPose {
        upper: slerp_dir(&x.upper, &y.upper, s),
        forearm: slerp_dir(&x.forearm, &y.forearm, s),
    };
    BodyPose {
        left: arm(&a.left, &b.left),
        right: arm(&a.right, &b.right),
        head: slerp_dir(&a.head, &b.head, s),
    }
}

fn slerp_dir(a: &Direction, b: &Direction, s: f64) -> Direction {
    if a == b {
        return *a;
    }
    let (u, v) = (a.unit(), b.unit());
    let angle = u.dot(&v).clamp(-1.0, 1.0).acos();
    let axis = u.cross(&v);
    let axis = if axis.norm() > 1e-9 {
        Unit::new_normalize(axis)
    } else {
        // antipodal: turn through the plane containing the body up axis when possible
        let helper = if u.z.abs() < 0.9 {
            Vector3::z()
        } else {
            Vector3::x()
        };
        Unit::new_normalize(u.cross(&helper))
    };
    let w = Rotation3::from_axis_angle(&axis, angle * s) * u;
    Direction {
        azimuth: w.y.atan2(w.x).to_degrees(),
        elevation: w.z.clamp(-1.0, 1.0).asin().to_degrees(),
    }
}
