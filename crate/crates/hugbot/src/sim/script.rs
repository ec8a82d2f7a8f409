//! Virtual user scripts.
//!
//! A script is a `key = value` document:
//!
//! ```text
//! seed = 7
//! height = 1.72          # meters
//! torso = 0.9            # circumference, meters
//! approach_at = 2.0      # seconds; the user walks up no earlier than this
//! observe = 0.2, 2.4, 380   # t, distance (m), bounding box (px); five or more, or none
//! gesture = squeeze, 10, 4, 1.0   # label, start after hug start, duration, intensity
//! release_at = 18        # seconds after hug start
//! ```
//!
//! Gestures may not overlap, except that a rub or pat may be performed
//! during a squeeze. Without `observe` lines, five observations consistent
//! with `height` are made up.

use hug_core::height::{HeightCalib, HeightObservation};
use hug_core::GestureClass;

use crate::kv::{self, Entry, KvError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedObservation {
    pub t: f64,
    pub obs: HeightObservation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedGesture {
    pub label: GestureClass,
    pub t_start: f64,
    pub duration: f64,
    pub intensity: f64,
}

impl PlannedGesture {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserScript {
    pub height: f64,
    pub torso: f64,
    pub approach_at: f64,
    pub observations: Vec<TimedObservation>,
    pub plan: Vec<PlannedGesture>,
    pub release_at: f64,
    pub seed: u64,
}

impl Default for UserScript {
    fn default() -> Self {
        Self {
            height: 1.7,
            torso: 0.9,
            approach_at: 2.0,
            observations: Vec::new(),
            plan: Vec::new(),
            release_at: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error(transparent)]
    Syntax(#[from] KvError),
    #[error("invalid script: {0}")]
    Invalid(String),
}

fn tuple(e: &Entry, n: usize, what: &str) -> Result<Vec<String>, KvError> {
    let parts: Vec<String> = e.value.split(',').map(|s| s.trim().to_string()).collect();
    if parts.len() != n {
        return Err(e.bad(what));
    }
    Ok(parts)
}

fn num(e: &Entry, s: &str, what: &str) -> Result<f64, KvError> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| e.bad(what))
}

impl UserScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let entries = kv::parse(text)?;
        let repeatable = |k: &str| k == "observe" || k == "gesture";
        let singles: Vec<Entry> = entries.iter().filter(|e| !repeatable(&e.key)).cloned().collect();
        kv::no_duplicates(&singles)?;
        let mut s = Self::default();
        for e in &entries {
            match e.key.as_str() {
                "height" => s.height = e.finite()?,
                "torso" => s.torso = e.finite()?,
                "approach_at" => s.approach_at = e.finite()?,
                "release_at" => s.release_at = e.finite()?,
                "seed" => s.seed = e.parse("an unsigned integer")?,
                "observe" => {
                    const WHAT: &str = "`t, distance, bbox`";
                    let p = tuple(e, 3, WHAT)?;
                    s.observations.push(TimedObservation {
                        t: num(e, &p[0], WHAT)?,
                        obs: HeightObservation { distance_d: num(e, &p[1], WHAT)?, bbox_height_b: num(e, &p[2], WHAT)? },
                    });
                }
                "gesture" => {
                    const WHAT: &str = "`label, start, duration, intensity`";
                    let p = tuple(e, 4, WHAT)?;
                    s.plan.push(PlannedGesture {
                        label: p[0].parse().map_err(|_| e.bad("a gesture label (hold, rub, pat, squeeze)"))?,
                        t_start: num(e, &p[1], WHAT)?,
                        duration: num(e, &p[2], WHAT)?,
                        intensity: num(e, &p[3], WHAT)?,
                    });
                }
                _ => return Err(e.unknown().into()),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let bad = |m: String| Err(ScriptError::Invalid(m));
        if !(self.height > 0.0) {
            return bad(format!("height must be positive, got {}", self.height));
        }
        if !(self.torso > 0.0) {
            return bad(format!("torso must be positive, got {}", self.torso));
        }
        if !(self.approach_at >= 0.0) {
            return bad("approach_at must not be negative".into());
        }
        if self.observations.windows(2).any(|w| w[1].t < w[0].t) {
            return bad("observations must be in time order".into());
        }
        for o in &self.observations {
            if !(o.t >= 0.0 && o.obs.distance_d > 0.0 && o.obs.bbox_height_b >= 0.0) {
                return bad(format!("observation at t={} needs t >= 0, distance > 0 and bbox >= 0", o.t));
            }
        }
        for g in &self.plan {
            if !(g.t_start >= 0.0 && g.duration > 0.0 && g.intensity > 0.0) {
                return bad(format!("{} gesture needs start >= 0, duration > 0 and intensity > 0", g.label));
            }
            if g.t_end() > self.release_at {
                return bad(format!("{} gesture at {} ends after release_at", g.label, g.t_start));
            }
        }
        for (i, a) in self.plan.iter().enumerate() {
            for b in &self.plan[i + 1..] {
                let overlap = a.t_start < b.t_end() && b.t_start < a.t_end();
                let layered = |x: GestureClass, y: GestureClass| {
                    x == GestureClass::Squeeze && matches!(y, GestureClass::Rub | GestureClass::Pat)
                };
                if overlap && !layered(a.label, b.label) && !layered(b.label, a.label) {
                    return bad(format!("{} at {} overlaps {} at {}", a.label, a.t_start, b.label, b.t_start));
                }
            }
        }
        Ok(())
    }

    /// The script's observations, or five made up from `height` if it has none.
    pub fn effective_observations(&self, calib: &HeightCalib) -> Vec<TimedObservation> {
        if !self.observations.is_empty() {
            return self.observations.clone();
        }
        (0..calib.average_count.max(1))
            .map(|k| {
                let d = 2.5 - 0.1 * k as f64;
                let b = ((self.height - calib.camera_h + calib.alpha * d) * calib.focal_f / d).max(0.0);
                TimedObservation { t: 0.2 * (k + 1) as f64, obs: HeightObservation { distance_d: d, bbox_height_b: b } }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut w = kv::Writer::default();
        w.put("seed", self.seed);
        w.put("height", self.height);
        w.put("torso", self.torso);
        w.put("approach_at", self.approach_at);
        for o in &self.observations {
            w.put("observe", format!("{}, {}, {}", o.t, o.obs.distance_d, o.obs.bbox_height_b));
        }
        for g in &self.plan {
            w.put("gesture", format!("{}, {}, {}, {}", g.label, g.t_start, g.duration, g.intensity));
        }
        w.put("release_at", self.release_at);
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hug_core::height::estimate_height;

    #[test]
    fn parse_full_script() {
        let s = UserScript::parse(
            "seed = 7\nheight = 1.8\nobserve = 0.2, 2.0, 400\ngesture = squeeze, 10, 4, 1\ngesture = pat, 11, 1, 1\nrelease_at = 18\n",
        )
        .unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.observations.len(), 1);
        assert_eq!(s.plan[1].label, GestureClass::Pat);
        assert_eq!(UserScript::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_scripts() {
        assert!(UserScript::parse("gesture = rub, 1, 2, 1\ngesture = pat, 2, 2, 1\n").is_err());
        assert!(UserScript::parse("gesture = rub, 1, 20, 1\n").is_err());
        assert!(UserScript::parse("gesture = wiggle, 1, 2, 1\n").is_err());
        assert!(UserScript::parse("height = 1\nheight = 2\n").is_err());
        assert!(UserScript::parse("colour = red\n").is_err());
    }

    #[test]
    fn synthesized_observations_match_height() {
        let calib = HeightCalib::default();
        let s = UserScript { height: 1.66, ..Default::default() };
        let obs = s.effective_observations(&calib);
        assert_eq!(obs.len(), 5);
        for o in obs {
            assert!((estimate_height(&o.obs, &calib).unwrap() - 1.66).abs() < 1e-9);
        }
    }
}
