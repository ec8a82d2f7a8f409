//! Baselining, window segmentation and the statistical feature registry.
//!
//! Windows are cut from the hug portion of a recording, baseline-subtracted,
//! and reduced to a fixed-order vector of [`FEATURE_COUNT`] statistics:
//!
//! * ten statistics (sum, min, max, mean, median, std, variance, peak count,
//!   interquartile range, trapezoidal area) over six streams: pressure and
//!   microphone, each raw and as first and second forward differences;
//! * ten shape statistics (RMS, mean absolute value, peak-to-peak range,
//!   skewness, excess kurtosis, zero crossings, energy, first value, last
//!   value, count above baseline) over the two raw streams.
//!
//! Conventions: population variance, lower median, lower-rank quartiles
//! (`sorted[(n-1)/4]`, `sorted[3(n-1)/4]`), strict local maxima as peaks,
//! differences on sample index. Degenerate inputs yield zeros, never NaN.

use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::params::EngineParams;
use crate::types::{GestureClass, HugRecording, SensorSample};

pub const FEATURE_COUNT: usize = 80;

/// Version tag of the feature registry a vector or model was built against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SchemaId(pub u32);

impl SchemaId {
    pub const CURRENT: SchemaId = SchemaId(1);
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hugfeat-v{}", self.0)
    }
}

impl core::str::FromStr for SchemaId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        s.trim().strip_prefix("hugfeat-v").and_then(|v| v.parse().ok()).map(SchemaId).ok_or(())
    }
}

/// Streams the per-stream statistics are computed over, in registry order.
pub const STREAMS: [&str; 6] = ["pressure", "mic", "pressure_d1", "mic_d1", "pressure_d2", "mic_d2"];

/// Statistics computed over every stream, in registry order.
pub const STREAM_STATS: [&str; 10] =
    ["sum", "min", "max", "mean", "median", "std", "var", "peaks", "iqr", "auc"];

/// Statistics computed over the raw streams only, in registry order.
pub const SHAPE_STATS: [&str; 10] = [
    "rms",
    "mean_abs",
    "range",
    "skewness",
    "kurtosis",
    "zero_crossings",
    "energy",
    "first",
    "last",
    "above_baseline",
];

/// Name of registry entry `index`, e.g. `pressure_d1.mean` or `mic.kurtosis`.
pub fn feature_name(index: usize) -> Option<(&'static str, &'static str)> {
    let per_stream = STREAMS.len() * STREAM_STATS.len();
    if index < per_stream {
        Some((STREAMS[index / STREAM_STATS.len()], STREAM_STATS[index % STREAM_STATS.len()]))
    } else if index < FEATURE_COUNT {
        let k = index - per_stream;
        Some((STREAMS[k / SHAPE_STATS.len()], SHAPE_STATS[k % SHAPE_STATS.len()]))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub schema: SchemaId,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT]) -> Self {
        Self { values, schema: SchemaId::CURRENT }
    }

    pub fn zeros() -> Self {
        Self::new([0.0; FEATURE_COUNT])
    }
}

/// Per-hug resting level of both channels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Baseline {
    pub pressure_med: f64,
    pub mic_med: f64,
}

impl Baseline {
    pub fn subtract(&self, s: &SensorSample) -> SensorSample {
        SensorSample::new(s.t, s.pressure - self.pressure_med, s.mic - self.mic_med)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeaturizeError {
    #[error("baseline needs {needed} samples, got {got}")]
    InsufficientBaseline { needed: usize, got: usize },
    #[error("hug spans {got} samples, shorter than one window of {window}")]
    HugTooShort { got: usize, window: usize },
}

/// A baseline-subtracted window of exactly `window_w` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<SensorSample>,
    /// Index of the first sample within the recording.
    pub start_index: usize,
    pub label: Option<GestureClass>,
}

/// Lower median: the element at rank `(n - 1) / 2` of the sorted input.
pub fn lower_median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

/// Per-channel lower median over the first `baseline_len` samples supplied.
pub fn compute_baseline(samples: &[SensorSample], baseline_len: usize) -> Result<Baseline, FeaturizeError> {
    if samples.len() < baseline_len || baseline_len == 0 {
        return Err(FeaturizeError::InsufficientBaseline { needed: baseline_len, got: samples.len() });
    }
    let head = &samples[..baseline_len];
    let mut p: Vec<f64> = head.iter().map(|s| s.pressure).collect();
    let mut m: Vec<f64> = head.iter().map(|s| s.mic).collect();
    Ok(Baseline { pressure_med: lower_median(&mut p), mic_med: lower_median(&mut m) })
}

/// Baseline for offline segmentation: the standard `baseline_len` samples
/// after hug start, or the whole hug when it is shorter than that.
pub fn recording_baseline(rec: &HugRecording, params: &EngineParams) -> Result<Baseline, FeaturizeError> {
    let hug = rec.hug_samples();
    compute_baseline(hug, params.baseline_len.min(hug.len()))
}

/// Annotation label of a window of recording samples: the class covering at
/// least `threshold` of the window's samples. Ties go to the larger overlap,
/// then to the earlier annotation. Uncovered windows are Hold.
pub fn window_label(rec: &HugRecording, window: &[SensorSample], threshold: f64) -> GestureClass {
    let mut best: Option<(usize, usize)> = None;
    for (k, a) in rec.annotations.iter().enumerate() {
        let covered = window.iter().filter(|s| a.contains(s.t)).count();
        if covered == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, c)) => covered > c,
        };
        if better {
            best = Some((k, covered));
        }
    }
    match best {
        Some((k, covered)) if covered as f64 >= threshold * window.len() as f64 => rec.annotations[k].label,
        _ => GestureClass::Hold,
    }
}

/// Cut labeled windows from the hug span at the offline stride.
pub fn segment(rec: &HugRecording, params: &EngineParams) -> Result<Vec<Window>, FeaturizeError> {
    let hug = rec.hug_samples();
    if hug.len() < params.window_w {
        return Err(FeaturizeError::HugTooShort { got: hug.len(), window: params.window_w });
    }
    let baseline = recording_baseline(rec, params)?;
    let offset = rec.hug_range().start;
    let mut out = windows_at(hug, &baseline, 0, params.stride(), params.window_w);
    for w in &mut out {
        let raw = &hug[w.start_index..w.start_index + params.window_w];
        w.label = Some(window_label(rec, raw, params.label_threshold_t));
        w.start_index += offset;
    }
    Ok(out)
}

/// Unlabeled baseline-subtracted windows of `width` samples starting at
/// `first` and advancing by `stride` while they fit inside `samples`.
/// Start indices are relative to `samples`.
pub fn windows_at(
    samples: &[SensorSample],
    baseline: &Baseline,
    first: usize,
    stride: usize,
    width: usize,
) -> Vec<Window> {
    let mut out = Vec::new();
    let mut start = first;
    while start + width <= samples.len() {
        out.push(Window {
            samples: samples[start..start + width].iter().map(|s| baseline.subtract(s)).collect(),
            start_index: start,
            label: None,
        });
        start += stride;
    }
    out
}

/// Number of windows `segment` produces for a hug of `n` samples.
pub fn window_count(n: usize, params: &EngineParams) -> usize {
    if n < params.window_w {
        0
    } else {
        (n - params.window_w) / params.stride() + 1
    }
}

pub fn extract(window: &Window) -> FeatureVector {
    let pressure: Vec<f64> = window.samples.iter().map(|s| s.pressure).collect();
    let mic: Vec<f64> = window.samples.iter().map(|s| s.mic).collect();
    extract_channels(&pressure, &mic)
}

/// Feature vector of two aligned, baseline-subtracted channels.
pub fn extract_channels(pressure: &[f64], mic: &[f64]) -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    let p1 = diff(pressure);
    let m1 = diff(mic);
    let p2 = diff(&p1);
    let m2 = diff(&m1);
    let streams: [&[f64]; 6] = [pressure, mic, &p1, &m1, &p2, &m2];

    let mut scratch = Vec::with_capacity(pressure.len().max(mic.len()));
    let mut slot = 0;
    for s in streams {
        stream_stats(s, &mut scratch, &mut values[slot..slot + STREAM_STATS.len()]);
        slot += STREAM_STATS.len();
    }
    for s in [pressure, mic] {
        shape_stats(s, &mut values[slot..slot + SHAPE_STATS.len()]);
        slot += SHAPE_STATS.len();
    }
    debug_assert_eq!(slot, FEATURE_COUNT);
    for v in &mut values {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    FeatureVector::new(values)
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn sum(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc + v)
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() { 0.0 } else { sum(x) / x.len() as f64 }
}

/// Second, third and fourth central moments about `mu`.
fn central_moments(x: &[f64], mu: f64) -> (f64, f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = x.len() as f64;
    (m2 / n, m3 / n, m4 / n)
}

fn peak_count(x: &[f64]) -> usize {
    x.windows(3).filter(|w| w[0] < w[1] && w[1] > w[2]).count()
}

fn trapezoid(x: &[f64]) -> f64 {
    x.windows(2).fold(0.0, |acc, w| acc + 0.5 * (w[0] + w[1]))
}

fn stream_stats(x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
    if x.is_empty() {
        out.fill(0.0);
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(x);
    scratch.sort_unstable_by(f64::total_cmp);
    let n = scratch.len();
    let mu = mean(x);
    let (var, _, _) = central_moments(x, mu);
    out[0] = sum(x);
    out[1] = scratch[0];
    out[2] = scratch[n - 1];
    out[3] = mu;
    out[4] = scratch[(n - 1) / 2];
    out[5] = libm::sqrt(var);
    out[6] = var;
    out[7] = peak_count(x) as f64;
    out[8] = scratch[3 * (n - 1) / 4] - scratch[(n - 1) / 4];
    out[9] = trapezoid(x);
}

fn shape_stats(x: &[f64], out: &mut [f64]) {
    if x.is_empty() {
        out.fill(0.0);
        return;
    }
    let n = x.len() as f64;
    let energy = x.iter().fold(0.0, |acc, v| acc + v * v);
    let mu = mean(x);
    let (m2, m3, m4) = central_moments(x, mu);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / (m2 * libm::sqrt(m2)), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    out[0] = libm::sqrt(energy / n);
    out[1] = x.iter().fold(0.0, |acc, v| acc + v.abs()) / n;
    out[2] = hi - lo;
    out[3] = skew;
    out[4] = kurt;
    out[5] = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    out[6] = energy;
    out[7] = x[0];
    out[8] = x[x.len() - 1];
    out[9] = x.iter().filter(|&&v| v > 0.0).count() as f64;
}
