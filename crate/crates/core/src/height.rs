//! User height from the depth camera's bounding box, and the shoulder-lift
//! placement derived from it.

use alloc::collections::VecDeque;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One person detection: distance to the camera and bounding-box height.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HeightObservation {
    /// Meters.
    pub distance_d: f64,
    /// Pixels.
    pub bbox_height_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HeightCalib {
    /// Depth image focal length, pixels.
    pub focal_f: f64,
    /// Occluded-height slope per meter of distance.
    pub alpha: f64,
    /// Camera height above the floor, meters.
    pub camera_h: f64,
    /// Heights of the short and tall model users, meters.
    pub h_min: f64,
    pub h_max: f64,
    /// Left shoulder-lift angles fitted to the model users, degrees.
    /// The defaults are placeholders; real values come from the robot.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Signed offset of the right shoulder lift relative to the left, degrees.
    pub right_offset: f64,
    /// Estimates averaged before the height is trusted.
    pub average_count: usize,
}

impl Default for HeightCalib {
    fn default() -> Self {
        Self {
            focal_f: 651.55,
            alpha: 0.5518,
            camera_h: 1.73,
            h_min: 1.40,
            h_max: 1.93,
            theta_min: 30.0,
            theta_max: 60.0,
            right_offset: 20.0,
            average_count: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeightError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("bounding-box height must be non-negative, got {0}")]
    NegativeBox(f64),
    #[error("invalid calibration: {0}")]
    Calibration(&'static str),
}

impl HeightCalib {
    pub fn validate(&self) -> Result<(), HeightError> {
        if !(self.focal_f > 0.0) {
            return Err(HeightError::Calibration("focal_f must be positive"));
        }
        if !(self.h_min < self.h_max) {
            return Err(HeightError::Calibration("h_min must be below h_max"));
        }
        if self.average_count == 0 {
            return Err(HeightError::Calibration("average_count must be at least 1"));
        }
        Ok(())
    }
}

/// `H = D*b/f - alpha*D + h_c`, in meters.
pub fn estimate_height(obs: &HeightObservation, calib: &HeightCalib) -> Result<f64, HeightError> {
    let d = obs.distance_d;
    if !(d > 0.0) {
        return Err(HeightError::NonPositiveDistance(d));
    }
    if !(obs.bbox_height_b >= 0.0) {
        return Err(HeightError::NegativeBox(obs.bbox_height_b));
    }
    Ok(d * obs.bbox_height_b / calib.focal_f - calib.alpha * d + calib.camera_h)
}

/// Left and right shoulder-lift angles for a user of height `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShoulderAngles {
    pub left: f64,
    pub right: f64,
    /// `h` fell outside the model-user range and was clamped.
    pub clamped: bool,
}

pub fn shoulder_angles(h: f64, calib: &HeightCalib) -> ShoulderAngles {
    let clamped_h = h.clamp(calib.h_min, calib.h_max);
    let left = calib.theta_min
        + (clamped_h - calib.h_min) * (calib.theta_max - calib.theta_min) / (calib.h_max - calib.h_min);
    ShoulderAngles { left, right: left + calib.right_offset, clamped: clamped_h != h }
}

/// Sliding mean over the latest `average_count` height estimates.
#[derive(Debug, Clone)]
pub struct HeightAverager {
    calib: HeightCalib,
    recent: VecDeque<f64>,
}

impl HeightAverager {
    pub fn new(calib: HeightCalib) -> Self {
        Self { recent: VecDeque::with_capacity(calib.average_count), calib }
    }

    /// Adds one observation; returns the average once enough are buffered.
    pub fn push(&mut self, obs: &HeightObservation) -> Result<Option<f64>, HeightError> {
        let h = estimate_height(obs, &self.calib)?;
        Ok(self.push_estimate(h))
    }

    pub fn push_estimate(&mut self, h: f64) -> Option<f64> {
        if self.recent.len() == self.calib.average_count {
            self.recent.pop_front();
        }
        self.recent.push_back(h);
        self.current()
    }

    /// Mean taken around the oldest estimate, so a constant stream averages
    /// to exactly that constant.
    pub fn current(&self) -> Option<f64> {
        let first = *self.recent.front()?;
        (self.recent.len() == self.calib.average_count).then(|| {
            first + self.recent.iter().map(|h| h - first).sum::<f64>() / self.recent.len() as f64
        })
    }
}
