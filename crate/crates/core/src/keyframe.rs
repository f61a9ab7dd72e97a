//! Per-part motion energy, peak detection and key-frame merging.
//!
//! Each tracked part gets its own energy `E = Ea - Es`, where `Ea` and `Es`
//! are the min-max normalized magnitudes of the smoothed acceleration and
//! velocity of the part's position. Brief stops show up as peaks of `E`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{JointName, SkeletonSequence};

#[derive(Debug, Error)]
pub enum KeyframeError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sequence is not uniformly sampled; resample it first")]
    NonUniform,
    #[error("invalid energy parameters: {0}")]
    BadParams(String),
}

pub type Result<T> = std::result::Result<T, KeyframeError>;

/// Which extrema of the energy are treated as key frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakMode {
    #[default]
    Max,
    Min,
}

impl std::str::FromStr for PeakMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max" => Ok(PeakMode::Max),
            "min" => Ok(PeakMode::Min),
            other => Err(format!("unknown peak mode `{other}` (expected min|max)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Gaussian smoothing width, seconds.
    pub sigma: f64,
    pub prominence: f64,
    /// Seconds between surviving peaks of one part.
    pub min_separation: f64,
    /// Seconds; peaks of all parts closer than this are averaged.
    pub merge_window: f64,
    pub tracked_parts: Vec<JointName>,
    /// Normalized-speed level below which a part counts as stopped. Two
    /// peaks enclosing a stop (or a peak and the clip edge) collapse to
    /// their midpoint. Zero disables collapsing.
    pub stop_speed: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            prominence: 0.1,
            min_separation: 0.25,
            merge_window: 0.2,
            tracked_parts: vec![
                JointName::WristLeft,
                JointName::WristRight,
                JointName::ElbowLeft,
                JointName::ElbowRight,
                JointName::Head,
            ],
            stop_speed: 0.1,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KeyframeError::BadParams(m));
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.prominence) {
            return bad(format!(
                "prominence must lie in [0, 1], got {}",
                self.prominence
            ));
        }
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return bad(format!(
                "min_separation must be >= 0, got {}",
                self.min_separation
            ));
        }
        if !(self.merge_window.is_finite() && self.merge_window >= 0.0) {
            return bad(format!(
                "merge_window must be >= 0, got {}",
                self.merge_window
            ));
        }
        if !(0.0..=1.0).contains(&self.stop_speed) {
            return bad(format!(
                "stop_speed must lie in [0, 1], got {}",
                self.stop_speed
            ));
        }
        Ok(())
    }
}

/// Energy of one part, sample-aligned with the sequence frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub part: JointName,
    pub values: Vec<f64>,
    pub ea: Vec<f64>,
    pub es: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyFrameSet {
    pub per_part: BTreeMap<JointName, Vec<usize>>,
    pub merged: Vec<usize>,
    pub params: EnergyParams,
}

impl KeyFrameSet {
    /// Appends the final frame as a key frame unless the last key frame
    /// already lies within the minimum separation of it.
    pub fn force_final(&mut self, frame_count: usize, rate: f64) {
        if frame_count == 0 {
            return;
        }
        let last = frame_count - 1;
        let min_gap = self.params.min_separation * rate;
        match self.merged.last() {
            None => self.merged.push(last),
            Some(&k) if k < last && (last - k) as f64 + 1e-9 >= min_gap => self.merged.push(last),
            _ => {}
        }
    }
}

/// Normalized Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma rate)`.
pub fn gaussian_kernel(sigma: f64, rate: f64) -> Vec<f64> {
    let s = sigma * rate;
    let r = (3.0 * s).ceil() as i64;
    let mut w: Vec<f64> = (-r..=r)
        .map(|k| (-(k as f64).powi(2) / (2.0 * s * s)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Discrete convolution with a zero-mean Gaussian, replicating edge samples.
pub fn smooth_signal(xs: &[f64], sigma: f64, rate: f64) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let w = gaussian_kernel(sigma, rate);
    let r = (w.len() / 2) as isize;
    let last = xs.len() as isize - 1;
    (0..xs.len() as isize)
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(k, wk)| {
                    let j = (i + k as isize - r).clamp(0, last) as usize;
                    wk * xs[j]
                })
                .sum()
        })
        .collect()
}

fn first_derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / dt,
            _ if i == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            _ => (x[i + 1] - x[i - 1]) / (2.0 * dt),
        })
        .collect()
}

fn second_derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let dt2 = dt * dt;
    (0..n)
        .map(|i| {
            let c = i.clamp(1, n - 2);
            (x[c + 1] - 2.0 * x[c] + x[c - 1]) / dt2
        })
        .collect()
}

/// Min-max normalization into [0, 1]; a series whose range is negligible
/// against its magnitude maps to all zeros.
fn normalize(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if !(range > 1e-9 * hi.abs().max(1.0)) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / range).collect()
}

pub fn energy(
    seq: &SkeletonSequence,
    part: JointName,
    params: &EnergyParams,
) -> Result<EnergySeries> {
    params.validate()?;
    if seq.len() < 3 {
        return Err(KeyframeError::InsufficientData(format!(
            "energy needs at least 3 frames, got {}",
            seq.len()
        )));
    }
    if !seq.is_uniform(1e-6) {
        return Err(KeyframeError::NonUniform);
    }
    let rate = seq.sample_rate;
    let dt = 1.0 / rate;
    let track = seq.track(part);

    let mut vel = vec![[0.0; 3]; track.len()];
    let mut acc = vec![[0.0; 3]; track.len()];
    for axis in 0..3 {
        let coord: Vec<f64> = track.iter().map(|p| p[axis]).collect();
        let smoothed = smooth_signal(&coord, params.sigma, rate);
        for (i, v) in first_derivative(&smoothed, dt).into_iter().enumerate() {
            vel[i][axis] = v;
        }
        for (i, a) in second_derivative(&smoothed, dt).into_iter().enumerate() {
            acc[i][axis] = a;
        }
    }
    let magnitude = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / 3f64.sqrt();
    let ea = normalize(&acc.iter().map(magnitude).collect::<Vec<_>>());
    let es = normalize(&vel.iter().map(magnitude).collect::<Vec<_>>());
    let values = ea.iter().zip(&es).map(|(a, s)| a - s).collect();
    Ok(EnergySeries {
        part,
        values,
        ea,
        es,
    })
}

/// Local maxima; a flat top bounded by lower samples yields its middle
/// index. Endpoints are never maxima.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Topographic prominence: height above the higher of the two lowest
/// points reachable on each side before meeting a strictly higher sample.
fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left = left.min(v);
    }
    let mut right = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

fn find_peaks(x: &[f64], min_prominence: f64, min_gap: f64) -> Vec<usize> {
    let mut candidates: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|&k| (c.abs_diff(k) as f64) + 1e-9 >= min_gap)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Frame indices of prominent maxima of `es.values`, at least
/// `min_separation` apart (taller peaks win).
pub fn detect_peaks(es: &EnergySeries, params: &EnergyParams, rate: f64) -> Vec<usize> {
    detect_extrema(es, params, rate, PeakMode::Max)
}

pub fn detect_extrema(
    es: &EnergySeries,
    params: &EnergyParams,
    rate: f64,
    mode: PeakMode,
) -> Vec<usize> {
    let min_gap = params.min_separation * rate;
    match mode {
        PeakMode::Max => find_peaks(&es.values, params.prominence, min_gap),
        PeakMode::Min => {
            let neg: Vec<f64> = es.values.iter().map(|v| -v).collect();
            find_peaks(&neg, params.prominence, min_gap)
        }
    }
}

fn round_mean(members: &[usize]) -> usize {
    (members.iter().sum::<usize>() as f64 / members.len() as f64).round() as usize
}

/// Replaces each pair of consecutive peaks whose stretch between them
/// contains a stop (normalized speed below `stop_speed`) by their rounded
/// midpoint. The clip edges act as peaks when the part starts or ends at
/// rest.
pub fn collapse_stops(peaks: &[usize], speed: &[f64], stop_speed: f64) -> Vec<usize> {
    if stop_speed <= 0.0 || peaks.is_empty() || speed.is_empty() {
        return peaks.to_vec();
    }
    let stopped = |a: usize, b: usize| -> bool {
        // open interval (a, b), or the single sample when adjacent
        let (lo, hi) = if b > a + 1 { (a + 1, b) } else { (a, b + 1) };
        speed[lo..hi.min(speed.len())]
            .iter()
            .any(|&s| s < stop_speed)
    };
    let last = speed.len() - 1;
    let mut out = Vec::with_capacity(peaks.len());
    let mut i = 0;
    if speed[0] < stop_speed && stopped(0, peaks[0]) && peaks[0] > 0 {
        out.push(round_mean(&[0, peaks[0]]));
        i = 1;
    }
    while i < peaks.len() {
        let p = peaks[i];
        if i + 1 < peaks.len() && stopped(p, peaks[i + 1]) {
            out.push(round_mean(&[p, peaks[i + 1]]));
            i += 2;
        } else if i + 1 == peaks.len() && p < last && speed[last] < stop_speed && stopped(p, last) {
            out.push(round_mean(&[p, last]));
            i += 1;
        } else {
            out.push(p);
            i += 1;
        }
    }
    out.dedup();
    out
}

/// Clusters the union of all part indices by single linkage (gap at most
/// `merge_window`) and replaces each cluster with its rounded mean.
/// Neighbouring results closer than `min_separation` are merged further.
pub fn merge_keyframes(
    per_part: &BTreeMap<JointName, Vec<usize>>,
    params: &EnergyParams,
    rate: f64,
) -> KeyFrameSet {
    let all: BTreeSet<usize> = per_part.values().flatten().copied().collect();
    let window = params.merge_window * rate + 1e-9;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for idx in all {
        match clusters.last_mut() {
            Some(c) if (idx - *c.last().unwrap()) as f64 <= window => c.push(idx),
            _ => clusters.push(vec![idx]),
        }
    }
    let min_gap = params.min_separation * rate - 1e-9;
    loop {
        let means: Vec<usize> = clusters.iter().map(|c| round_mean(c)).collect();
        match means
            .windows(2)
            .position(|w| ((w[1] - w[0]) as f64) < min_gap)
        {
            Some(i) => {
                let next = clusters.remove(i + 1);
                clusters[i].extend(next);
            }
            None => {
                return KeyFrameSet {
                    per_part: per_part.clone(),
                    merged: means,
                    params: params.clone(),
                }
            }
        }
    }
}

/// Full segmentation of a uniformly sampled sequence.
pub fn detect_keyframes(
    seq: &SkeletonSequence,
    params: &EnergyParams,
    mode: PeakMode,
) -> Result<KeyFrameSet> {
    params.validate()?;
    let rate = seq.sample_rate;
    let mut per_part = BTreeMap::new();
    for &part in &params.tracked_parts {
        let es = energy(seq, part, params)?;
        let peaks = detect_extrema(&es, params, rate, mode);
        let peaks = match mode {
            PeakMode::Max => collapse_stops(&peaks, &es.es, params.stop_speed),
            PeakMode::Min => peaks,
        };
        per_part.insert(part, peaks);
    }
    Ok(merge_keyframes(&per_part, params, rate))
}
