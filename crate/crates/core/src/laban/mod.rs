//! Labanotation symbols, columns and timed scores.

mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{parse_score, serialize_score};

/// Tolerance, in seconds, for comparing cell boundaries.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LabanError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("score violates {} rule(s): {}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("time {t} outside [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, LabanError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabanDirection {
    Place,
    Forward,
    RightForward,
    Right,
    RightBackward,
    Backward,
    LeftBackward,
    Left,
    LeftForward,
}

impl LabanDirection {
    pub const ALL: [LabanDirection; 9] = [
        LabanDirection::Place,
        LabanDirection::Forward,
        LabanDirection::RightForward,
        LabanDirection::Right,
        LabanDirection::RightBackward,
        LabanDirection::Backward,
        LabanDirection::LeftBackward,
        LabanDirection::Left,
        LabanDirection::LeftForward,
    ];

    /// Azimuth of the sector center in degrees, counter-clockwise from
    /// forward toward left; `None` for `Place`.
    pub fn azimuth(self) -> Option<f64> {
        use LabanDirection::*;
        match self {
            Place => None,
            Forward => Some(0.0),
            LeftForward => Some(45.0),
            Left => Some(90.0),
            LeftBackward => Some(135.0),
            Backward => Some(180.0),
            RightBackward => Some(-135.0),
            Right => Some(-90.0),
            RightForward => Some(-45.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        use LabanDirection::*;
        match self {
            Place => "Place",
            Forward => "Forward",
            RightForward => "RightForward",
            Right => "Right",
            RightBackward => "RightBackward",
            Backward => "Backward",
            LeftBackward => "LeftBackward",
            Left => "Left",
            LeftForward => "LeftForward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabanLevel {
    High,
    Middle,
    Low,
}

impl LabanLevel {
    pub const ALL: [LabanLevel; 3] = [LabanLevel::High, LabanLevel::Middle, LabanLevel::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            LabanLevel::High => "High",
            LabanLevel::Middle => "Middle",
            LabanLevel::Low => "Low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabanSymbol {
    pub direction: LabanDirection,
    pub level: LabanLevel,
}

impl LabanSymbol {
    pub const fn new(direction: LabanDirection, level: LabanLevel) -> Self {
        Self { direction, level }
    }

    /// `(Place, Middle)` carries no direction for a limb.
    pub fn is_valid_limb(&self) -> bool {
        !(self.direction == LabanDirection::Place && self.level == LabanLevel::Middle)
    }

    /// The 26 limb symbols: 8 azimuths x 3 levels plus straight up and down.
    pub fn all_valid() -> Vec<LabanSymbol> {
        LabanDirection::ALL
            .iter()
            .flat_map(|&d| LabanLevel::ALL.iter().map(move |&l| LabanSymbol::new(d, l)))
            .filter(LabanSymbol::is_valid_limb)
            .collect()
    }
}

impl fmt::Display for LabanSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.direction.as_str(), self.level.as_str())
    }
}

impl FromStr for LabanSymbol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (d, l) = s
            .split_once(':')
            .ok_or_else(|| format!("bad symbol `{s}`"))?;
        let direction = LabanDirection::ALL
            .into_iter()
            .find(|x| x.as_str() == d)
            .ok_or_else(|| format!("unknown direction `{d}`"))?;
        let level = LabanLevel::ALL
            .into_iter()
            .find(|x| x.as_str() == l)
            .ok_or_else(|| format!("unknown level `{l}`"))?;
        Ok(LabanSymbol::new(direction, level))
    }
}

/// Body-part columns of an upper-body score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColumnName {
    LeftArm,
    RightArm,
    LeftUpperArm,
    LeftForearm,
    RightUpperArm,
    RightForearm,
    Head,
}

impl ColumnName {
    pub const ALL: [ColumnName; 7] = [
        ColumnName::LeftArm,
        ColumnName::RightArm,
        ColumnName::LeftUpperArm,
        ColumnName::LeftForearm,
        ColumnName::RightUpperArm,
        ColumnName::RightForearm,
        ColumnName::Head,
    ];

    pub fn as_str(self) -> &'static str {
        use ColumnName::*;
        match self {
            LeftArm => "LeftArm",
            RightArm => "RightArm",
            LeftUpperArm => "LeftUpperArm",
            LeftForearm => "LeftForearm",
            RightUpperArm => "RightUpperArm",
            RightForearm => "RightForearm",
            Head => "Head",
        }
    }
}

impl fmt::Display for ColumnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ColumnName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown column `{s}`"))
    }
}

/// A symbol holding on the half-open interval `(start, start + duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabanCell {
    pub symbol: LabanSymbol,
    pub start: f64,
    pub duration: f64,
}

impl LabanCell {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start < t && t <= self.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabanColumn {
    pub name: ColumnName,
    pub cells: Vec<LabanCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabanScore {
    pub columns: Vec<LabanColumn>,
    pub total_duration: f64,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NoColumns,
    DuplicateColumn,
    /// A whole-arm column alongside upper-arm/forearm columns of the same side.
    ExclusiveArmColumns,
    PlaceMiddle,
    NonPositiveDuration,
    NegativeStart,
    NonFiniteTime,
    Unordered,
    Overlap,
    ExceedsTotalDuration,
    BadTotalDuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub column: Option<ColumnName>,
    pub cell: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.rule)?;
        if let Some(c) = self.column {
            write!(f, " in {c}")?;
        }
        if let Some(i) = self.cell {
            write!(f, " cell {i}")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

/// Checks every structural rule of a score; empty means valid.
pub fn validate(score: &LabanScore) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |column: Option<ColumnName>, cell: Option<usize>, rule: Rule, detail: String| {
        out.push(Violation {
            column,
            cell,
            rule,
            detail,
        })
    };

    if !(score.total_duration.is_finite() && score.total_duration >= 0.0) {
        push(
            None,
            None,
            Rule::BadTotalDuration,
            format!("{}", score.total_duration),
        );
    }
    if score.columns.is_empty() {
        push(None, None, Rule::NoColumns, String::new());
    }
    let names: Vec<ColumnName> = score.columns.iter().map(|c| c.name).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            push(Some(*n), None, Rule::DuplicateColumn, String::new());
        }
    }
    for (whole, parts) in [
        (
            ColumnName::LeftArm,
            [ColumnName::LeftUpperArm, ColumnName::LeftForearm],
        ),
        (
            ColumnName::RightArm,
            [ColumnName::RightUpperArm, ColumnName::RightForearm],
        ),
    ] {
        if names.contains(&whole) && parts.iter().any(|p| names.contains(p)) {
            push(Some(whole), None, Rule::ExclusiveArmColumns, String::new());
        }
    }

    for col in &score.columns {
        let c = Some(col.name);
        for (i, cell) in col.cells.iter().enumerate() {
            if !cell.symbol.is_valid_limb() {
                push(c, Some(i), Rule::PlaceMiddle, cell.symbol.to_string());
            }
            if !(cell.start.is_finite() && cell.duration.is_finite()) {
                push(c, Some(i), Rule::NonFiniteTime, String::new());
                continue;
            }
            if cell.duration <= 0.0 {
                push(
                    c,
                    Some(i),
                    Rule::NonPositiveDuration,
                    format!("{}", cell.duration),
                );
            }
            if cell.start < 0.0 {
                push(c, Some(i), Rule::NegativeStart, format!("{}", cell.start));
            }
            if cell.end() > score.total_duration + TIME_EPS {
                push(
                    c,
                    Some(i),
                    Rule::ExceedsTotalDuration,
                    format!("ends at {} > {}", cell.end(), score.total_duration),
                );
            }
            if i > 0 && cell.start < col.cells[i - 1].start {
                push(c, Some(i), Rule::Unordered, String::new());
            }
        }
        for i in 0..col.cells.len() {
            for j in i + 1..col.cells.len() {
                let (a, b) = (&col.cells[i], &col.cells[j]);
                if a.start < b.end() - TIME_EPS && b.start < a.end() - TIME_EPS {
                    push(c, Some(j), Rule::Overlap, format!("cells {i} and {j}"));
                }
            }
        }
    }
    out
}

/// Symbol of every column whose cell covers `t` under the half-open
/// `(start, end]` rule. Columns without a covering cell are absent.
pub fn states_at(score: &LabanScore, t: f64) -> Result<BTreeMap<ColumnName, LabanSymbol>> {
    if !(0.0..=score.total_duration).contains(&t) {
        return Err(LabanError::OutOfRange {
            t,
            total: score.total_duration,
        });
    }
    Ok(score
        .columns
        .iter()
        .filter_map(|col| {
            col.cells
                .iter()
                .find(|cell| cell.contains(t))
                .map(|cell| (col.name, cell.symbol))
        })
        .collect())
}

impl LabanScore {
    pub fn column(&self, name: ColumnName) -> Option<&LabanColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Distinct cell end times in ascending order.
    pub fn key_times(&self) -> Vec<f64> {
        let mut ends: Vec<f64> = self
            .columns
            .iter()
            .flat_map(|c| c.cells.iter().map(LabanCell::end))
            .collect();
        ends.sort_by(f64::total_cmp);
        ends.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
        ends
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LabanDirection::*;
    use LabanLevel::*;

    pub(crate) fn cell(d: LabanDirection, l: LabanLevel, start: f64, duration: f64) -> LabanCell {
        LabanCell {
            symbol: LabanSymbol::new(d, l),
            start,
            duration,
        }
    }

    fn one_column(cells: Vec<LabanCell>) -> LabanScore {
        LabanScore {
            columns: vec![LabanColumn {
                name: ColumnName::RightArm,
                cells,
            }],
            total_duration: 4.0,
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn twenty_six_limb_symbols() {
        let all = LabanSymbol::all_valid();
        assert_eq!(all.len(), 26);
        assert!(!all.contains(&LabanSymbol::new(Place, Middle)));
    }

    #[test]
    fn well_formed_score_is_valid() {
        let s = one_column(vec![
            cell(Forward, Middle, 0.0, 1.5),
            cell(Place, High, 1.5, 1.0),
        ]);
        assert!(validate(&s).is_empty());
    }

    #[test]
    fn place_middle_rejected() {
        let s = one_column(vec![cell(Place, Middle, 0.0, 1.0)]);
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::PlaceMiddle);
        assert_eq!(v[0].column, Some(ColumnName::RightArm));
        assert_eq!(v[0].cell, Some(0));
    }

    #[test]
    fn overlap_reported_per_pair() {
        let s = one_column(vec![
            cell(Forward, Middle, 0.0, 2.0),
            cell(Left, Low, 1.0, 1.0),
        ]);
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Overlap);
    }

    #[test]
    fn empty_score_and_exclusive_columns() {
        let mut s = one_column(vec![]);
        s.columns.clear();
        assert_eq!(validate(&s)[0].rule, Rule::NoColumns);

        let mut s = one_column(vec![cell(Forward, Middle, 0.0, 1.0)]);
        s.columns.push(LabanColumn {
            name: ColumnName::RightForearm,
            cells: vec![],
        });
        assert_eq!(validate(&s)[0].rule, Rule::ExclusiveArmColumns);
    }

    #[test]
    fn cells_past_the_end_and_bad_durations() {
        let s = one_column(vec![
            cell(Forward, Middle, 3.0, 2.0),
            cell(Left, Middle, 5.0, 0.0),
        ]);
        let rules: Vec<Rule> = validate(&s).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::ExceedsTotalDuration));
        assert!(rules.contains(&Rule::NonPositiveDuration));
    }

    #[test]
    fn half_open_state_lookup() {
        let s = one_column(vec![
            cell(Forward, Middle, 0.0, 1.5),
            cell(Place, High, 1.5, 2.5),
        ]);
        let at = |t| {
            states_at(&s, t)
                .unwrap()
                .get(&ColumnName::RightArm)
                .copied()
        };
        assert_eq!(at(0.0), None);
        assert_eq!(at(0.7), Some(LabanSymbol::new(Forward, Middle)));
        // the starting state is not part of the next cell
        assert_eq!(at(1.5), Some(LabanSymbol::new(Forward, Middle)));
        assert_eq!(at(4.0), Some(LabanSymbol::new(Place, High)));
        assert!(matches!(
            states_at(&s, 4.5),
            Err(LabanError::OutOfRange { .. })
        ));
    }

    #[test]
    fn key_times_are_distinct_ends() {
        let mut s = one_column(vec![
            cell(Forward, Middle, 0.0, 1.5),
            cell(Place, High, 1.5, 2.5),
        ]);
        s.columns.push(LabanColumn {
            name: ColumnName::Head,
            cells: vec![cell(Place, High, 0.0, 1.5)],
        });
        assert_eq!(s.key_times(), vec![1.5, 4.0]);
    }

    #[test]
    fn symbol_text_form() {
        let s: LabanSymbol = "LeftForward:High".parse().unwrap();
        assert_eq!(s, LabanSymbol::new(LeftForward, High));
        assert_eq!(s.to_string(), "LeftForward:High");
        assert!("Forwrd:High".parse::<LabanSymbol>().is_err());
    }
}
