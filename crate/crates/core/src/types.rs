//! Domain records shared by every stage of the pipeline.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One of the four intra-hug gestures.
///
/// The declaration order is the canonical order used by probability rows,
/// confusion matrices and every serialized table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GestureClass {
    Hold,
    Rub,
    Pat,
    Squeeze,
}

impl GestureClass {
    pub const COUNT: usize = 4;
    pub const ALL: [GestureClass; 4] = [Self::Hold, Self::Rub, Self::Pat, Self::Squeeze];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hold => "hold",
            Self::Rub => "rub",
            Self::Pat => "pat",
            Self::Squeeze => "squeeze",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gesture class `{0}`")]
pub struct UnknownGesture(pub String);

impl FromStr for GestureClass {
    type Err = UnknownGesture;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownGesture(s.into()))
    }
}

/// A timestamped reading from the back-chamber pressure sensor and microphone.
///
/// Units are raw sensor counts; nothing downstream depends on absolute
/// calibration because the per-hug baseline is subtracted.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SensorSample {
    /// Seconds since stream start.
    pub t: f64,
    pub pressure: f64,
    pub mic: f64,
}

impl SensorSample {
    pub const fn new(t: f64, pressure: f64, mic: f64) -> Self {
        Self { t, pressure, mic }
    }
}

/// Annotated span of a gesture. Membership is half-open: `t_start <= t < t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GestureInterval {
    pub label: GestureClass,
    pub t_start: f64,
    pub t_end: f64,
}

impl GestureInterval {
    pub const fn new(label: GestureClass, t_start: f64, t_end: f64) -> Self {
        Self { label, t_start, t_end }
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

/// A full sensor recording of one hug plus its gesture annotations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HugRecording {
    pub samples: Vec<SensorSample>,
    pub annotations: Vec<GestureInterval>,
    pub hug_start: f64,
    pub hug_end: f64,
    pub participant_id: String,
}

impl HugRecording {
    /// Index range of the samples whose timestamps fall within `[hug_start, hug_end]`.
    pub fn hug_range(&self) -> Range<usize> {
        let start = self.samples.partition_point(|s| s.t < self.hug_start);
        let end = self.samples.partition_point(|s| s.t <= self.hug_end);
        start..end.max(start)
    }

    pub fn hug_samples(&self) -> &[SensorSample] {
        &self.samples[self.hug_range()]
    }

    /// Label of the annotation covering `t`, if any.
    pub fn label_at(&self, t: f64) -> Option<GestureClass> {
        self.annotations.iter().find(|a| a.contains(t)).map(|a| a.label)
    }
}

/// A broken [`HugRecording`] invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("hug_start {start} is after hug_end {end}")]
    HugSpanReversed { start: f64, end: f64 },
    #[error("sample {index} has a non-finite field")]
    NonFiniteSample { index: usize },
    #[error("timestamp at sample {index} does not increase")]
    NonMonotonicTime { index: usize },
    #[error("annotation {index} ends ({t_end}) before it starts ({t_start})")]
    IntervalReversed { index: usize, t_start: f64, t_end: f64 },
    #[error("annotation {index} lies outside the hug span")]
    IntervalOutsideHug { index: usize },
    #[error("annotations {first} and {second} overlap")]
    IntervalsOverlap { first: usize, second: usize },
}

/// Check every recording invariant, returning all violations found.
pub fn validate_recording(rec: &HugRecording) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(rec.hug_start <= rec.hug_end) {
        out.push(Violation::HugSpanReversed { start: rec.hug_start, end: rec.hug_end });
    }
    for (index, s) in rec.samples.iter().enumerate() {
        if !(s.t.is_finite() && s.pressure.is_finite() && s.mic.is_finite()) {
            out.push(Violation::NonFiniteSample { index });
        }
    }
    for (index, pair) in rec.samples.windows(2).enumerate() {
        if !(pair[1].t > pair[0].t) {
            out.push(Violation::NonMonotonicTime { index: index + 1 });
        }
    }
    for (index, a) in rec.annotations.iter().enumerate() {
        if !(a.t_start < a.t_end) {
            out.push(Violation::IntervalReversed { index, t_start: a.t_start, t_end: a.t_end });
            continue;
        }
        if a.t_start < rec.hug_start || a.t_end > rec.hug_end {
            out.push(Violation::IntervalOutsideHug { index });
        }
    }
    for i in 0..rec.annotations.len() {
        for j in i + 1..rec.annotations.len() {
            let (a, b) = (&rec.annotations[i], &rec.annotations[j]);
            if a.t_start < b.t_end && b.t_start < a.t_end {
                out.push(Violation::IntervalsOverlap { first: i, second: j });
            }
        }
    }
    out
}

/// Offline hug-span heuristic used when annotating raw recordings: the hug
/// starts at the first sample whose pressure rises more than `rise` above the
/// initial value and ends at the first later sample that falls back to it.
pub fn infer_hug_span(samples: &[SensorSample], rise: f64) -> Option<(f64, f64)> {
    let initial = samples.first()?.pressure;
    let start = samples.iter().position(|s| s.pressure > initial + rise)?;
    let end = samples[start..]
        .iter()
        .position(|s| s.pressure <= initial)
        .map_or(samples.len() - 1, |k| start + k);
    Some((samples[start].t, samples[end].t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn uniform(n: usize) -> Vec<SensorSample> {
        (0..n).map(|i| SensorSample::new(i as f64 / 45.0, 1000.0, 512.0)).collect()
    }

    fn recording(n: usize) -> HugRecording {
        let samples = uniform(n);
        let end = samples.last().unwrap().t;
        HugRecording {
            samples,
            annotations: vec![GestureInterval::new(GestureClass::Rub, 5.0, 8.0)],
            hug_start: 0.0,
            hug_end: end,
            participant_id: "P01".into(),
        }
    }

    #[test]
    fn class_order_is_fixed() {
        assert!(GestureClass::Hold < GestureClass::Rub);
        assert!(GestureClass::Rub < GestureClass::Pat);
        assert!(GestureClass::Pat < GestureClass::Squeeze);
        for (i, g) in GestureClass::ALL.iter().enumerate() {
            assert_eq!(g.index(), i);
            assert_eq!(g.name().parse::<GestureClass>().unwrap(), *g);
        }
        assert!("tickle".parse::<GestureClass>().is_err());
    }

    #[test]
    fn well_formed_recording_has_no_violations() {
        assert_eq!(validate_recording(&recording(1000)), vec![]);
    }

    #[test]
    fn reversed_interval_is_named() {
        let mut rec = recording(1000);
        rec.annotations.push(GestureInterval::new(GestureClass::Pat, 12.0, 10.0));
        let v = validate_recording(&rec);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::IntervalReversed { index: 1, .. }));
    }

    #[test]
    fn non_monotonic_timestamp_is_named() {
        let mut rec = recording(1000);
        rec.samples[417].t = rec.samples[416].t;
        assert_eq!(validate_recording(&rec), vec![Violation::NonMonotonicTime { index: 417 }]);
    }

    #[test]
    fn overlapping_and_outside_annotations() {
        let mut rec = recording(100);
        rec.annotations = vec![
            GestureInterval::new(GestureClass::Rub, 0.2, 1.0),
            GestureInterval::new(GestureClass::Pat, 0.8, 1.5),
            GestureInterval::new(GestureClass::Squeeze, 1.8, 9.0),
        ];
        let v = validate_recording(&rec);
        assert!(v.contains(&Violation::IntervalsOverlap { first: 0, second: 1 }));
        assert!(v.contains(&Violation::IntervalOutsideHug { index: 2 }));
    }

    #[test]
    fn hug_range_selects_span() {
        let mut rec = recording(450);
        rec.hug_start = 1.0;
        rec.hug_end = 2.0;
        let r = rec.hug_range();
        assert_eq!(r, 45..91);
    }

    #[test]
    fn hug_span_heuristic() {
        let mut s = uniform(100);
        for x in &mut s[20..70] {
            x.pressure += 10.0;
        }
        let (a, b) = infer_hug_span(&s, 1.0).unwrap();
        assert_eq!(a, s[20].t);
        assert_eq!(b, s[70].t);
    }
}
