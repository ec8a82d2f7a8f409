//! Streaming gesture detector.
//!
//! After the hug starts, the first `baseline_len` samples fix the baseline.
//! The detector then fills a ring of `window_w` baseline-subtracted samples,
//! classifies it once full, and again every `stride_rt` samples.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::featurize::{compute_baseline, extract_channels, Baseline, FeatureVector};
use crate::forest::{ForestError, ForestModel, Prediction};
use crate::params::EngineParams;
use crate::types::{GestureClass, SensorSample};

/// Anything that maps a feature vector to a gesture prediction.
pub trait GestureClassifier {
    fn classify(&self, x: &FeatureVector) -> Result<Prediction, ForestError>;
}

impl GestureClassifier for ForestModel {
    fn classify(&self, x: &FeatureVector) -> Result<Prediction, ForestError> {
        self.predict(x)
    }
}

impl<C: GestureClassifier + ?Sized> GestureClassifier for &C {
    fn classify(&self, x: &FeatureVector) -> Result<Prediction, ForestError> {
        (**self).classify(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    PreHug,
    Baselining,
    Warmup,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Timestamp of the newest sample in the classified window.
    pub t: f64,
    pub label: GestureClass,
    pub probabilities: [f64; GestureClass::COUNT],
    /// Index, counted from hug start, of the first sample in the window.
    pub window_start: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectError {
    #[error("sample pushed before the hug started")]
    NotStarted,
    #[error(transparent)]
    Classifier(#[from] ForestError),
}

pub struct Detector<C> {
    classifier: C,
    window_w: usize,
    stride_rt: usize,
    baseline_len: usize,
    phase: Phase,
    baseline_buf: Vec<SensorSample>,
    baseline: Option<Baseline>,
    ring: VecDeque<SensorSample>,
    since_emit: usize,
    seen: usize,
    pressure: Vec<f64>,
    mic: Vec<f64>,
    last_features: Option<FeatureVector>,
}

impl<C: GestureClassifier> Detector<C> {
    pub fn new(classifier: C, params: &EngineParams) -> Self {
        Self {
            classifier,
            window_w: params.window_w,
            stride_rt: params.stride_rt,
            baseline_len: params.baseline_len,
            phase: Phase::PreHug,
            baseline_buf: Vec::with_capacity(params.baseline_len),
            baseline: None,
            ring: VecDeque::with_capacity(params.window_w),
            since_emit: 0,
            seen: 0,
            pressure: Vec::with_capacity(params.window_w),
            mic: Vec::with_capacity(params.window_w),
            last_features: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn baseline(&self) -> Option<Baseline> {
        self.baseline
    }

    /// Features behind the most recent detection.
    pub fn last_features(&self) -> Option<&FeatureVector> {
        self.last_features.as_ref()
    }

    pub fn classifier(&self) -> &C {
        &self.classifier
    }

    /// Signal from the session that the arms are closing. Has no effect once
    /// a hug is already in progress.
    pub fn hug_started(&mut self) {
        if self.phase == Phase::PreHug {
            self.phase = Phase::Baselining;
        }
    }

    pub fn reset(&mut self) {
        self.phase = Phase::PreHug;
        self.baseline_buf.clear();
        self.baseline = None;
        self.ring.clear();
        self.since_emit = 0;
        self.seen = 0;
        self.last_features = None;
    }

    pub fn push(&mut self, sample: SensorSample) -> Result<Option<Detection>, DetectError> {
        match self.phase {
            Phase::PreHug => Err(DetectError::NotStarted),
            Phase::Baselining => {
                self.seen += 1;
                self.baseline_buf.push(sample);
                if self.baseline_buf.len() == self.baseline_len {
                    let b = compute_baseline(&self.baseline_buf, self.baseline_len)
                        .expect("buffer holds exactly baseline_len samples");
                    self.baseline = Some(b);
                    self.baseline_buf.clear();
                    self.phase = Phase::Warmup;
                }
                Ok(None)
            }
            Phase::Warmup => {
                self.seen += 1;
                self.enqueue(sample);
                if self.ring.len() == self.window_w {
                    self.phase = Phase::Active;
                    self.since_emit = 0;
                    return self.emit().map(Some);
                }
                Ok(None)
            }
            Phase::Active => {
                self.seen += 1;
                self.enqueue(sample);
                self.since_emit += 1;
                if self.since_emit == self.stride_rt {
                    self.since_emit = 0;
                    return self.emit().map(Some);
                }
                Ok(None)
            }
        }
    }

    fn enqueue(&mut self, sample: SensorSample) {
        let b = self.baseline.expect("baseline is set before warmup");
        if self.ring.len() == self.window_w {
            self.ring.pop_front();
        }
        self.ring.push_back(b.subtract(&sample));
    }

    fn emit(&mut self) -> Result<Detection, DetectError> {
        self.pressure.clear();
        self.mic.clear();
        for s in &self.ring {
            self.pressure.push(s.pressure);
            self.mic.push(s.mic);
        }
        let features = extract_channels(&self.pressure, &self.mic);
        let pred = self.classifier.classify(&features)?;
        self.last_features = Some(features);
        Ok(Detection {
            t: self.ring.back().map_or(0.0, |s| s.t),
            label: pred.class,
            probabilities: pred.probabilities,
            window_start: self.seen - self.window_w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::argmax_class;

    /// Labels a window Squeeze when its mean pressure is positive.
    struct Threshold;

    impl GestureClassifier for Threshold {
        fn classify(&self, x: &FeatureVector) -> Result<Prediction, ForestError> {
            let mut p = [1.0, 0.0, 0.0, 0.0];
            if x.values[3] > 0.0 {
                p = [0.0, 0.0, 0.0, 1.0];
            }
            Ok(Prediction { class: argmax_class(&p), probabilities: p })
        }
    }

    fn sample(i: usize) -> SensorSample {
        SensorSample::new(i as f64 / 45.0, 1000.0, 500.0)
    }

    #[test]
    fn first_detection_after_baseline_plus_window() {
        let params = EngineParams::default();
        let mut d = Detector::new(Threshold, &params);
        d.hug_started();
        for i in 0..199 {
            assert_eq!(d.push(sample(i)).unwrap(), None, "sample {i}");
        }
        let first = d.push(sample(199)).unwrap().expect("200th sample emits");
        assert_eq!(first.window_start, 150);
        assert_eq!(first.label, GestureClass::Hold);
        assert_eq!(d.phase(), Phase::Active);
    }

    #[test]
    fn one_detection_per_stride() {
        let params = EngineParams::default();
        let mut d = Detector::new(Threshold, &params);
        d.hug_started();
        for i in 0..150 {
            d.push(sample(i)).unwrap();
        }
        let mut n = 0;
        for i in 150..10_150 {
            n += d.push(sample(i)).unwrap().is_some() as usize;
        }
        assert_eq!(n, 1 + (10_000 - 50) / 10);
        assert_eq!(n, 996);
    }

    #[test]
    fn push_requires_hug_start() {
        let mut d = Detector::new(Threshold, &EngineParams::default());
        assert_eq!(d.push(sample(0)), Err(DetectError::NotStarted));
    }

    #[test]
    fn reset_clears_everything() {
        let params = EngineParams::default();
        let mut d = Detector::new(Threshold, &params);
        d.hug_started();
        for i in 0..250 {
            d.push(sample(i)).unwrap();
        }
        d.reset();
        d.reset();
        assert_eq!(d.phase(), Phase::PreHug);
        assert!(d.baseline().is_none());
        assert_eq!(d.push(sample(0)), Err(DetectError::NotStarted));
        d.hug_started();
        // A fresh hug needs a fresh baseline and a full window again.
        for i in 0..199 {
            assert!(d.push(sample(i)).unwrap().is_none());
        }
        assert!(d.push(sample(199)).unwrap().is_some());
    }

    #[test]
    fn baseline_is_subtracted() {
        let params = EngineParams::default();
        let mut d = Detector::new(Threshold, &params);
        d.hug_started();
        for i in 0..150 {
            d.push(sample(i)).unwrap();
        }
        let mut last = None;
        for i in 150..200 {
            let mut s = sample(i);
            s.pressure += 30.0;
            last = d.push(s).unwrap();
        }
        assert_eq!(last.unwrap().label, GestureClass::Squeeze);
        assert_eq!(d.last_features().unwrap().values[3], 30.0);
    }
}
