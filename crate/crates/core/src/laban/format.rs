//! JSON score files.
//!
//! The canonical form has sorted keys, one cell per line and every number
//! printed with six decimals, so equal scores serialize to equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Deserialize;

use super::{
    validate, ColumnName, LabanCell, LabanColumn, LabanDirection, LabanError, LabanLevel,
    LabanScore, LabanSymbol, Result,
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScore {
    total_duration: f64,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    columns: Vec<RawColumn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: ColumnName,
    cells: Vec<RawCell>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    dir: LabanDirection,
    level: LabanLevel,
    start: f64,
    duration: f64,
}

pub fn parse_score(text: &str) -> Result<LabanScore> {
    let raw: RawScore = serde_json::from_str(text).map_err(|e| LabanError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let score = LabanScore {
        total_duration: raw.total_duration,
        meta: raw.meta,
        columns: raw
            .columns
            .into_iter()
            .map(|c| LabanColumn {
                name: c.name,
                cells: c
                    .cells
                    .into_iter()
                    .map(|x| LabanCell {
                        symbol: LabanSymbol::new(x.dir, x.level),
                        start: x.start,
                        duration: x.duration,
                    })
                    .collect(),
            })
            .collect(),
    };
    let violations = validate(&score);
    if violations.is_empty() {
        Ok(score)
    } else {
        Err(LabanError::Validation(violations))
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

/// Canonical text of a valid score. Times are written with six decimals,
/// so `parse_score` reproduces the score exactly when its times already
/// lie on the microsecond grid.
pub fn serialize_score(score: &LabanScore) -> Result<String> {
    let violations = validate(score);
    if !violations.is_empty() {
        return Err(LabanError::Validation(violations));
    }
    let mut out = String::from("{\n  \"columns\": [");
    for (ci, col) in score.columns.iter().enumerate() {
        out.push_str(if ci == 0 { "\n" } else { ",\n" });
        out.push_str("    {\n      \"cells\": [");
        for (i, c) in col.cells.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "        {{\"dir\": {}, \"duration\": {}, \"level\": {}, \"start\": {}}}",
                string(c.symbol.direction.as_str()),
                num(c.duration),
                string(c.symbol.level.as_str()),
                num(c.start)
            );
        }
        if !col.cells.is_empty() {
            out.push_str("\n      ");
        }
        let _ = write!(
            out,
            "],\n      \"name\": {}\n    }}",
            string(col.name.as_str())
        );
    }
    if !score.columns.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("],\n  \"meta\": {");
    for (i, (k, v)) in score.meta.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        let _ = write!(out, "    {}: {}", string(k), string(v));
    }
    if !score.meta.is_empty() {
        out.push_str("\n  ");
    }
    let _ = write!(
        out,
        "}},\n  \"total_duration\": {}\n}}\n",
        num(score.total_duration)
    );
    Ok(out)
}
