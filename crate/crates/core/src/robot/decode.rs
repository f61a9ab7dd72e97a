use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::Serialize;

use super::{
    insert_segment_angles, neutral_yaw_pitch, JointPose, Result, RobotDescription, RobotError,
    Segment, SegmentRef,
};
use crate::encoder::digitize;
use crate::laban::{
    states_at, validate, ColumnName, LabanError, LabanLevel, LabanScore, LabanSymbol, TIME_EPS,
};

/// Below this norm a vector sum counts as the reverse singularity.
const REVERSE_EPS: f64 = 1e-6;
/// Horizontal norm below which yaw is undefined and set to zero.
const POLE_EPS: f64 = 1e-9;
/// Overshoot, in degrees, absorbed by a limit without flagging a clamp.
const LIMIT_EPS: f64 = 1e-9;

pub fn symbol_to_vector(s: LabanSymbol) -> Result<Vector3<f64>> {
    if !s.is_valid_limb() {
        return Err(RobotError::BadSymbol(s));
    }
    let elevation: f64 = match (s.direction.azimuth(), s.level) {
        (None, LabanLevel::High) => 90.0,
        (None, _) => -90.0,
        (Some(_), LabanLevel::High) => 45.0,
        (Some(_), LabanLevel::Middle) => 0.0,
        (Some(_), LabanLevel::Low) => -45.0,
    };
    let azimuth = s.direction.azimuth().unwrap_or(0.0).to_radians();
    let el = elevation.to_radians();
    Ok(Vector3::new(
        el.cos() * azimuth.cos(),
        el.cos() * azimuth.sin(),
        el.sin(),
    ))
}

/// Direction history of one segment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConcatenationState {
    pub last_direction: Option<Vector3<f64>>,
}

/// Normalized sum of two unit directions. Opposite directions fall back to
/// the last direction in `hist`, or to `a` when there is none.
pub fn concatenate(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    hist: ConcatenationState,
) -> (Vector3<f64>, ConcatenationState) {
    let sum = a + b;
    let n = sum.norm();
    let out = if n > REVERSE_EPS {
        sum / n
    } else {
        hist.last_direction.unwrap_or(*a)
    };
    (
        out,
        ConcatenationState {
            last_direction: Some(out),
        },
    )
}

/// Folds the present source directions of one segment in column order.
fn reduce_segment(
    sources: &[ColumnName],
    dirs: &BTreeMap<ColumnName, Vector3<f64>>,
    hist: &mut ConcatenationState,
) -> Option<(Vector3<f64>, Vec<ColumnName>)> {
    let present: Vec<ColumnName> = sources
        .iter()
        .copied()
        .filter(|c| dirs.contains_key(c))
        .collect();
    let (first, rest) = present.split_first()?;
    let mut acc = dirs[first];
    for c in rest {
        let (v, h) = concatenate(&acc, &dirs[c], *hist);
        acc = v;
        *hist = h;
    }
    hist.last_direction = Some(acc);
    Some((acc, present))
}

/// Segment directions from column directions. A segment fed by one column
/// copies it; a segment fed by several folds them with [`concatenate`].
/// Errors when a mapped segment has none of its columns present.
pub fn reduce_vectors(
    dirs: &BTreeMap<ColumnName, Vector3<f64>>,
    robot: &RobotDescription,
    hist: &mut BTreeMap<SegmentRef, ConcatenationState>,
) -> Result<BTreeMap<SegmentRef, Vector3<f64>>> {
    let mut out = BTreeMap::new();
    for (seg, sources) in robot.sources() {
        let h = hist.entry(seg.clone()).or_default();
        let (v, _) = reduce_segment(&sources, dirs, h)
            .ok_or_else(|| RobotError::MissingColumn(seg.clone()))?;
        out.insert(seg, v);
    }
    Ok(out)
}

pub fn reduce_columns(
    symbols: &BTreeMap<ColumnName, LabanSymbol>,
    robot: &RobotDescription,
    hist: &mut BTreeMap<SegmentRef, ConcatenationState>,
) -> Result<BTreeMap<SegmentRef, Vector3<f64>>> {
    let dirs = symbol_directions(symbols)?;
    reduce_vectors(&dirs, robot, hist)
}

fn symbol_directions(
    symbols: &BTreeMap<ColumnName, LabanSymbol>,
) -> Result<BTreeMap<ColumnName, Vector3<f64>>> {
    symbols
        .iter()
        .map(|(&c, &s)| Ok((c, symbol_to_vector(s)?)))
        .collect()
}

fn clamp_linear(v: f64, [lo, hi]: [f64; 2]) -> (f64, bool) {
    if v < lo {
        (lo, v < lo - LIMIT_EPS)
    } else if v > hi {
        (hi, v > hi + LIMIT_EPS)
    } else {
        (v, false)
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Clamps an angle to the nearest limit along the circle; ties go to the
/// lower limit.
fn clamp_circular(v: f64, lim: [f64; 2]) -> (f64, bool) {
    let [lo, hi] = lim;
    for cand in [v, v - 360.0, v + 360.0] {
        if cand >= lo - LIMIT_EPS && cand <= hi + LIMIT_EPS {
            return (cand.clamp(lo, hi), false);
        }
    }
    if circular_distance(v, lo) <= circular_distance(v, hi) {
        (lo, true)
    } else {
        (hi, true)
    }
}

/// Yaw and pitch in degrees that point `seg` along `v`, clamped into its
/// limits.
pub fn vector_to_joints(v: &Vector3<f64>, seg: &Segment) -> (f64, f64, bool) {
    let horizontal = v.x.hypot(v.y);
    let ylim = seg.effective_yaw_limits();
    let (yaw, yaw_clamped) = if horizontal < POLE_EPS {
        (0f64.clamp(ylim[0], ylim[1]), false)
    } else {
        clamp_circular(v.y.atan2(v.x).to_degrees(), ylim)
    };
    let pitch = v.z.clamp(-1.0, 1.0).asin().to_degrees();
    let (pitch, pitch_clamped) = clamp_linear(pitch, seg.effective_pitch_limits());
    (yaw, pitch, yaw_clamped || pitch_clamped)
}

/// Direction a segment points at given its yaw and pitch.
pub(crate) fn joints_to_vector(yaw: f64, pitch: f64) -> Vector3<f64> {
    let (y, p) = (yaw.to_radians(), pitch.to_radians());
    Vector3::new(p.cos() * y.cos(), p.cos() * y.sin(), p.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "columns", rename_all = "snake_case")]
pub enum Origin {
    /// No symbol has reached the segment yet.
    Neutral,
    /// Previous angles kept while no source column has a symbol.
    Held,
    /// Reduced from these columns.
    Columns(Vec<ColumnName>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutcome {
    pub yaw: f64,
    pub pitch: f64,
    pub clamped: bool,
    /// Commanded direction before clamping.
    pub direction: Option<Vector3<f64>>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPose {
    pub pose: JointPose,
    pub segments: BTreeMap<SegmentRef, SegmentOutcome>,
}

fn check_coverage(score: &LabanScore, robot: &RobotDescription) -> Result<()> {
    let present: Vec<ColumnName> = score
        .columns
        .iter()
        .filter(|c| !c.cells.is_empty())
        .map(|c| c.name)
        .collect();
    for col in &score.columns {
        if !robot.column_map.contains_key(&col.name) {
            log::warn!(
                "robot {} has no mapping for column {}; ignored",
                robot.name,
                col.name
            );
        }
    }
    for (seg, sources) in robot.sources() {
        if !sources.iter().any(|c| present.contains(c)) {
            return Err(RobotError::MissingColumn(seg));
        }
    }
    Ok(())
}

/// One pose per distinct cell end time with per-segment provenance.
pub fn decode_detailed(score: &LabanScore, robot: &RobotDescription) -> Result<Vec<DecodedPose>> {
    let violations = validate(score);
    if !violations.is_empty() {
        return Err(LabanError::Validation(violations).into());
    }
    check_coverage(score, robot)?;
    let sources = robot.sources();
    let mut hist: BTreeMap<SegmentRef, ConcatenationState> = BTreeMap::new();
    let mut last: BTreeMap<SegmentRef, SegmentOutcome> = BTreeMap::new();
    let mut out = Vec::new();
    for t in score.key_times() {
        let symbols = states_at(score, t.min(score.total_duration))?;
        let dirs = symbol_directions(&symbols)?;
        let mut angles = BTreeMap::new();
        let mut segments = BTreeMap::new();
        for (seg_ref, seg) in robot.segments() {
            let reduced = sources.get(&seg_ref).and_then(|src| {
                reduce_segment(src, &dirs, hist.entry(seg_ref.clone()).or_default())
            });
            let outcome = match (reduced, last.get(&seg_ref)) {
                (Some((v, cols)), _) => {
                    let (yaw, pitch, clamped) = vector_to_joints(&v, seg);
                    SegmentOutcome {
                        yaw,
                        pitch,
                        clamped,
                        direction: Some(v),
                        origin: Origin::Columns(cols),
                    }
                }
                (None, Some(prev)) => SegmentOutcome {
                    origin: Origin::Held,
                    ..prev.clone()
                },
                (None, None) => {
                    let (yaw, pitch) = neutral_yaw_pitch(seg);
                    SegmentOutcome {
                        yaw,
                        pitch,
                        clamped: false,
                        direction: None,
                        origin: Origin::Neutral,
                    }
                }
            };
            insert_segment_angles(&mut angles, seg, outcome.yaw, outcome.pitch);
            if outcome.origin != Origin::Neutral {
                last.insert(seg_ref.clone(), outcome.clone());
            }
            segments.insert(seg_ref, outcome);
        }
        out.push(DecodedPose {
            pose: JointPose { t, angles },
            segments,
        });
    }
    Ok(out)
}

pub fn decode_score(score: &LabanScore, robot: &RobotDescription) -> Result<Vec<JointPose>> {
    Ok(decode_detailed(score, robot)?
        .into_iter()
        .map(|d| d.pose)
        .collect())
}

/// Joint angles for continuous column directions, as when retargeting an
/// observed clip frame by frame. Segments without a source hold neutral.
pub fn retarget_frame(
    dirs: &BTreeMap<ColumnName, Vector3<f64>>,
    robot: &RobotDescription,
    hist: &mut BTreeMap<SegmentRef, ConcatenationState>,
) -> BTreeMap<String, f64> {
    let sources = robot.sources();
    let mut angles = BTreeMap::new();
    for (seg_ref, seg) in robot.segments() {
        let reduced = sources
            .get(&seg_ref)
            .and_then(|src| reduce_segment(src, dirs, hist.entry(seg_ref.clone()).or_default()));
        let (yaw, pitch) = match reduced {
            Some((v, _)) => {
                let (y, p, _) = vector_to_joints(&v, seg);
                (y, p)
            }
            None => neutral_yaw_pitch(seg),
        };
        insert_segment_angles(&mut angles, seg, yaw, pitch);
    }
    angles
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CellOutcome {
    Match,
    Mismatch {
        decoded: String,
    },
    /// Realized as a boundary gesture; not compared.
    Clamped,
    /// Segment shared with another column at this time; not compared.
    Merged,
    /// Column has no target segment.
    Unmapped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub column: ColumnName,
    pub cell: usize,
    pub end: f64,
    pub symbol: String,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub robot: String,
    pub compared: usize,
    pub matched: usize,
    pub clamped: Vec<String>,
    pub cells: Vec<CellCheck>,
}

impl RoundtripReport {
    /// True iff every compared cell matched.
    pub fn passed(&self) -> bool {
        self.compared == self.matched
    }
}

/// Decodes `score`, re-encodes every segment a single column drove and
/// compares with that column's symbol at each cell end.
pub fn roundtrip(score: &LabanScore, robot: &RobotDescription) -> Result<RoundtripReport> {
    let decoded = decode_detailed(score, robot)?;
    let mut cells = Vec::new();
    for col in &score.columns {
        let targets = robot.targets(col.name);
        for (i, cell) in col.cells.iter().enumerate() {
            let end = cell.end();
            let pose = decoded
                .iter()
                .find(|d| (d.pose.t - end).abs() <= TIME_EPS)
                .expect("every cell end is a key time");
            let mut outcomes = Vec::new();
            for seg in &targets {
                let o = &pose.segments[seg];
                outcomes.push(match &o.origin {
                    Origin::Columns(cols) if cols.as_slice() == [col.name] => {
                        if o.clamped {
                            CellOutcome::Clamped
                        } else {
                            let got = digitize(&joints_to_vector(o.yaw, o.pitch))
                                .expect("joint angles give a unit vector");
                            if got == cell.symbol {
                                CellOutcome::Match
                            } else {
                                CellOutcome::Mismatch {
                                    decoded: got.to_string(),
                                }
                            }
                        }
                    }
                    _ => CellOutcome::Merged,
                });
            }
            let outcome = if let Some(m) = outcomes
                .iter()
                .find(|o| matches!(o, CellOutcome::Mismatch { .. }))
            {
                m.clone()
            } else if outcomes.contains(&CellOutcome::Clamped) {
                CellOutcome::Clamped
            } else if outcomes.contains(&CellOutcome::Match) {
                CellOutcome::Match
            } else if outcomes.is_empty() {
                CellOutcome::Unmapped
            } else {
                CellOutcome::Merged
            };
            cells.push(CellCheck {
                column: col.name,
                cell: i,
                end,
                symbol: cell.symbol.to_string(),
                outcome,
            });
        }
    }
    let compared = cells
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Match | CellOutcome::Mismatch { .. }))
        .count();
    let matched = cells
        .iter()
        .filter(|c| c.outcome == CellOutcome::Match)
        .count();
    let clamped = cells
        .iter()
        .filter(|c| c.outcome == CellOutcome::Clamped)
        .map(|c| format!("{}[{}] {}", c.column, c.cell, c.symbol))
        .collect();
    Ok(RoundtripReport {
        robot: robot.name.clone(),
        compared,
        matched,
        clamped,
        cells,
    })
}
