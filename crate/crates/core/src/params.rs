//! The engine parameter record.
//!
//! Every tunable constant of the perception and behavior loop lives here so
//! that other modules never hard-code timing, threshold or policy values.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EngineParams {
    /// Samples per feature window.
    pub window_w: usize,
    /// Samples shared by consecutive offline windows.
    pub overlap_o: usize,
    /// Minimum fraction of a window an annotation must cover to label it.
    pub label_threshold_t: f64,
    /// Samples between consecutive real-time detections.
    pub stride_rt: usize,
    /// Samples after hug start used for the baseline median.
    pub baseline_len: usize,
    /// Nominal sensor rate, Hz.
    pub sample_rate: f64,
    /// Neutral rating subtracted before exponentiation.
    pub eta: f64,
    /// Exponent favouring highly rated responses.
    pub m_exponent: f64,
    /// Seconds during which detections are ignored after a discrete response.
    pub deaf_window: f64,
    /// Seconds of uninterrupted hold before a proactive gesture.
    pub proactive_delay: f64,
    /// Single-reading release torque during a plain embrace, Nm.
    pub torque_release_embrace: f64,
    /// Single-reading release torque while the robot gestures, Nm.
    pub torque_release_gesture: f64,
    /// Readings averaged before comparing against a joint's embrace threshold.
    pub torque_ma_window: usize,
    /// Duration of a fixed robot gesture, seconds.
    pub gesture_duration: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            window_w: 50,
            overlap_o: 37,
            label_threshold_t: 0.75,
            stride_rt: 10,
            baseline_len: 150,
            sample_rate: 45.0,
            eta: 5.0,
            m_exponent: 3.0,
            deaf_window: 2.5,
            proactive_delay: 1.5,
            torque_release_embrace: 20.0,
            torque_release_gesture: 40.0,
            torque_ma_window: 3,
            gesture_duration: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid parameter `{key}`: {reason}")]
pub struct ParamError {
    pub key: &'static str,
    pub reason: &'static str,
}

impl EngineParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let fail = |key, reason| Err(ParamError { key, reason });
        if self.window_w < 3 {
            return fail("window_w", "must be at least 3 so second differences exist");
        }
        if self.overlap_o == 0 || self.overlap_o >= self.window_w {
            return fail("overlap_o", "must satisfy 0 < overlap_o < window_w");
        }
        if !(self.label_threshold_t > 0.0 && self.label_threshold_t <= 1.0) {
            return fail("label_threshold_t", "must lie in (0, 1]");
        }
        if self.stride_rt == 0 {
            return fail("stride_rt", "must be at least 1");
        }
        if self.baseline_len == 0 {
            return fail("baseline_len", "must be at least 1");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return fail("sample_rate", "must be positive");
        }
        if !(0.0..=10.0).contains(&self.eta) {
            return fail("eta", "must lie in [0, 10]");
        }
        if !(self.m_exponent > 0.0 && self.m_exponent.is_finite()) {
            return fail("m_exponent", "must be positive");
        }
        for (key, v) in [
            ("deaf_window", self.deaf_window),
            ("proactive_delay", self.proactive_delay),
            ("gesture_duration", self.gesture_duration),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(key, "must be a non-negative duration");
            }
        }
        if !(self.torque_release_embrace > 0.0) {
            return fail("torque_release_embrace", "must be positive");
        }
        if !(self.torque_release_gesture > 0.0) {
            return fail("torque_release_gesture", "must be positive");
        }
        if self.torque_ma_window == 0 {
            return fail("torque_ma_window", "must be at least 1");
        }
        Ok(())
    }

    /// Offline window stride, `window_w - overlap_o`.
    pub fn stride(&self) -> usize {
        self.window_w - self.overlap_o
    }

    /// Real-time detections per second.
    pub fn detection_rate(&self) -> f64 {
        self.sample_rate / self.stride_rt as f64
    }

    /// Number of consecutive hold detections equivalent to `proactive_delay`.
    pub fn proactive_holds(&self) -> usize {
        let n = libm::round(self.proactive_delay * self.detection_rate());
        (n as usize).max(1)
    }

    /// Period of one sample, seconds.
    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = EngineParams::default();
        p.validate().unwrap();
        assert_eq!(p.stride(), 13);
        assert_eq!(p.proactive_holds(), 7);
    }

    #[test]
    fn overlap_equal_to_window_is_rejected() {
        let p = EngineParams { overlap_o: 50, ..Default::default() };
        assert_eq!(p.validate().unwrap_err().key, "overlap_o");
    }

    #[test]
    fn threshold_bounds() {
        let p = EngineParams { label_threshold_t: 0.0, ..Default::default() };
        assert_eq!(p.validate().unwrap_err().key, "label_threshold_t");
        let p = EngineParams { label_threshold_t: 1.0, ..Default::default() };
        p.validate().unwrap();
        let p = EngineParams { m_exponent: 0.0, ..Default::default() };
        assert_eq!(p.validate().unwrap_err().key, "m_exponent");
        let p = EngineParams { stride_rt: 0, ..Default::default() };
        assert_eq!(p.validate().unwrap_err().key, "stride_rt");
    }
}
