#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use labanmotion::laban::{ColumnName, LabanCell, LabanColumn, LabanScore, LabanSymbol};
use labanmotion::skeleton::Direction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
}

pub fn golden_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .expect("golden directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

pub fn random_symbol(rng: &mut impl Rng) -> LabanSymbol {
    *LabanSymbol::all_valid().choose(rng).unwrap()
}

/// Random valid score on the microsecond grid, arm or split columns.
pub fn random_score(rng: &mut impl Rng) -> LabanScore {
    use ColumnName::*;
    let pool: &[ColumnName] = if rng.gen_bool(0.5) {
        &[LeftArm, RightArm, Head]
    } else {
        &[LeftUpperArm, LeftForearm, RightUpperArm, RightForearm, Head]
    };
    let mut names: Vec<ColumnName> = pool.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
    if names.is_empty() {
        names.push(pool[rng.gen_range(0..pool.len())]);
    }
    names.shuffle(rng);
    let micros = |rng: &mut _| -> i64 { Rng::gen_range(rng, 1..2_000_000) };
    let mut total = 0i64;
    let columns = names
        .into_iter()
        .map(|name| {
            let mut t = 0i64;
            let cells = (0..rng.gen_range(0..6))
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        t += micros(rng);
                    }
                    let d = micros(rng);
                    let cell = LabanCell {
                        symbol: random_symbol(rng),
                        start: t as f64 / 1e6,
                        duration: d as f64 / 1e6,
                    };
                    t += d;
                    cell
                })
                .collect();
            total = total.max(t);
            LabanColumn { name, cells }
        })
        .collect();
    let mut meta = BTreeMap::new();
    if rng.gen_bool(0.5) {
        meta.insert(
            "note".to_string(),
            format!("trial \"{}\"", rng.gen::<u16>()),
        );
    }
    LabanScore {
        columns,
        total_duration: (total + rng.gen_range(0..1000)).max(1) as f64 / 1e6,
        meta,
    }
}

/// Random direction at least `min_sep` and at most `max_sep` degrees from `prev`.
pub fn direction_away(
    rng: &mut impl Rng,
    prev: &Direction,
    min_sep: f64,
    max_sep: f64,
) -> Direction {
    loop {
        let d = Direction::new(rng.gen_range(-180.0..180.0), rng.gen_range(-80.0..80.0));
        let angle = d
            .unit()
            .dot(&prev.unit())
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees();
        if (min_sep..=max_sep).contains(&angle) {
            return d;
        }
    }
}
