//! Configuration file: engine parameters plus the robot, forest and policy
//! settings that have no published values.
//!
//! ```text
//! # engine parameters use bare keys
//! window_w = 50
//! m_exponent = 3
//! height.theta_min = 30
//! session.embrace_threshold.left_elbow_flex = 10
//! session.release_debounce = off
//! forest.n_trees = 100
//! forest.max_depth = none
//! ratings.hold = 6.6, 7.02, 6.55, 7.77
//! policy.fallback = hold
//! ```
//!
//! Absent keys keep their defaults. The four `ratings.*` rows must be given
//! together; without them the published response tables are used.

use std::path::Path;

use hug_core::behave::{default_policy_with, BehaveError, RatingMatrix, ResponsePolicy};
use hug_core::forest::ForestParams;
use hug_core::height::HeightCalib;
use hug_core::hugfsm::{JointId, ProactiveTrigger, SessionConfig, JOINT_COUNT};
use hug_core::{EngineParams, GestureClass};

use crate::kv::{self, Entry, KvError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] KvError),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl ToString) -> Self {
        ConfigError::Invalid { key: key.into(), reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub engine: EngineParams,
    pub height: HeightCalib,
    pub session: SessionConfig,
    pub forest: ForestParams,
    pub ratings: Option<RatingMatrix>,
    pub fallback: Option<GestureClass>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            engine: EngineParams::default(),
            height: HeightCalib::default(),
            session: SessionConfig::default(),
            forest: ForestParams::default(),
            ratings: None,
            fallback: Some(GestureClass::Hold),
        }
    }
}

/// Engine parameters from a config file; other sections are validated too.
pub fn load_params(path: &Path) -> Result<EngineParams, ConfigError> {
    Ok(Config::load(path)?.engine)
}

/// Engine parameters from config text.
pub fn parse_params(text: &str) -> Result<EngineParams, ConfigError> {
    Ok(Config::parse(text)?.engine)
}

fn joint_from_name(name: &str) -> Option<JointId> {
    JointId::ALL.into_iter().find(|j| j.to_string() == name)
}

fn optional_number(e: &Entry) -> Result<Option<f64>, KvError> {
    match e.value.as_str() {
        "off" | "none" => Ok(None),
        _ => e.finite().map(Some),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = kv::parse(text)?;
        kv::no_duplicates(&entries)?;
        let mut c = Config::default();
        let mut rows: [Option<[f64; 4]>; 4] = [None; 4];
        for e in &entries {
            if let Some(action) = e.key.strip_prefix("ratings.") {
                let a: GestureClass = action.parse().map_err(|_| e.unknown())?;
                let v = e.numbers()?;
                let row: [f64; 4] = v.try_into().map_err(|_| e.bad("four ratings"))?;
                rows[a.index()] = Some(row);
            } else {
                c.apply(e)?;
            }
        }
        match rows.iter().filter(|r| r.is_some()).count() {
            0 => {}
            4 => c.ratings = Some(RatingMatrix { rows: rows.map(Option::unwrap) }),
            _ => return Err(ConfigError::invalid("ratings", "all four rows (hold, rub, pat, squeeze) are required")),
        }
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, e: &Entry) -> Result<(), KvError> {
        let p = &mut self.engine;
        let h = &mut self.height;
        let s = &mut self.session;
        let f = &mut self.forest;
        let count = |e: &Entry| e.parse::<usize>("a non-negative integer");
        match e.key.as_str() {
            "window_w" => p.window_w = count(e)?,
            "overlap_o" => p.overlap_o = count(e)?,
            "label_threshold_t" => p.label_threshold_t = e.finite()?,
            "stride_rt" => p.stride_rt = count(e)?,
            "baseline_len" => p.baseline_len = count(e)?,
            "sample_rate" => p.sample_rate = e.finite()?,
            "eta" => p.eta = e.finite()?,
            "m_exponent" => p.m_exponent = e.finite()?,
            "deaf_window" => p.deaf_window = e.finite()?,
            "proactive_delay" => p.proactive_delay = e.finite()?,
            "torque_release_embrace" => p.torque_release_embrace = e.finite()?,
            "torque_release_gesture" => p.torque_release_gesture = e.finite()?,
            "torque_ma_window" => p.torque_ma_window = count(e)?,
            "gesture_duration" => p.gesture_duration = e.finite()?,

            "height.focal_f" => h.focal_f = e.finite()?,
            "height.alpha" => h.alpha = e.finite()?,
            "height.camera_h" => h.camera_h = e.finite()?,
            "height.h_min" => h.h_min = e.finite()?,
            "height.h_max" => h.h_max = e.finite()?,
            "height.theta_min" => h.theta_min = e.finite()?,
            "height.theta_max" => h.theta_max = e.finite()?,
            "height.right_offset" => h.right_offset = e.finite()?,
            "height.average_count" => h.average_count = count(e)?,

            "session.joint_velocity" => s.joint_velocity = e.finite()?,
            "session.release_eps_frac" => s.release_eps_frac = e.finite()?,
            "session.min_contact_rise" => s.min_contact_rise = e.finite()?,
            "session.release_debounce" => s.release_debounce = optional_number(e)?,
            "session.proactive_trigger" => {
                s.proactive_trigger = match e.value.as_str() {
                    "consecutive_holds" => ProactiveTrigger::ConsecutiveHolds,
                    "wall_clock" => ProactiveTrigger::WallClock,
                    _ => return Err(e.bad("consecutive_holds or wall_clock")),
                }
            }
            "session.kinematics.rub_lift" => s.kinematics.rub_lift = e.finite()?,
            "session.kinematics.pat_elbow" => s.kinematics.pat_elbow = e.finite()?,
            "session.kinematics.squeeze_shoulder" => s.kinematics.squeeze_shoulder = e.finite()?,
            "session.kinematics.squeeze_elbow" => s.kinematics.squeeze_elbow = e.finite()?,

            "forest.n_trees" => f.n_trees = count(e)?,
            "forest.max_depth" => {
                f.max_depth = match e.value.as_str() {
                    "none" => None,
                    _ => Some(count(e)?),
                }
            }
            "forest.min_leaf" => f.min_leaf = count(e)?,
            "forest.features_per_split" => f.features_per_split = count(e)?,
            "forest.bootstrap" => f.bootstrap = e.flag()?,
            "forest.seed" => f.seed = e.parse("an unsigned integer")?,

            "policy.fallback" => {
                self.fallback = match e.value.as_str() {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| e.bad("a gesture name or none"))?),
                }
            }
            key => {
                let (table, joint) = key.rsplit_once('.').ok_or_else(|| e.unknown())?;
                let j = joint_from_name(joint).ok_or_else(|| e.unknown())?;
                let slot = match table {
                    "session.rest_pose" => &mut s.rest_pose,
                    "session.closing_goal" => &mut s.closing_goal,
                    "session.embrace_threshold" => &mut s.embrace_threshold,
                    _ => return Err(e.unknown()),
                };
                // Infinite thresholds mean the joint never stops on contact.
                slot[j.index()] = if table == "session.embrace_threshold" { e.number()? } else { e.finite()? };
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine.validate().map_err(|e| ConfigError::invalid(e.key, e.reason))?;
        self.height.validate().map_err(|e| ConfigError::invalid("height", e))?;
        self.forest.validate().map_err(|e| ConfigError::invalid("forest", e))?;
        let s = &self.session;
        if !(s.joint_velocity > 0.0) {
            return Err(ConfigError::invalid("session.joint_velocity", "must be positive"));
        }
        if !(0.0..1.0).contains(&s.release_eps_frac) {
            return Err(ConfigError::invalid("session.release_eps_frac", "must lie in [0, 1)"));
        }
        if !(s.min_contact_rise >= 0.0) {
            return Err(ConfigError::invalid("session.min_contact_rise", "must be non-negative"));
        }
        if s.release_debounce.is_some_and(|d| d < 0.0) {
            return Err(ConfigError::invalid("session.release_debounce", "must be non-negative"));
        }
        for (i, &thr) in s.embrace_threshold.iter().enumerate() {
            if !(thr > 0.0) {
                let key = format!("session.embrace_threshold.{}", JointId::ALL[i]);
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        if let Some(r) = &self.ratings {
            r.validate().map_err(|e| ConfigError::invalid("ratings", e))?;
        }
        Ok(())
    }

    /// Response policy: the configured ratings, or the published tables.
    pub fn policy(&self) -> Result<ResponsePolicy, BehaveError> {
        let (eta, m) = (self.engine.eta, self.engine.m_exponent);
        match self.ratings {
            Some(r) => ResponsePolicy::from_ratings(r, eta, m, self.fallback),
            None => {
                let mut p = default_policy_with(eta, m);
                p.fallback = self.fallback;
                Ok(p)
            }
        }
    }

    /// Full text form; `Config::parse(&c.to_text())` gives back `c`.
    pub fn to_text(&self) -> String {
        let mut w = kv::Writer::default();
        w.comment("engine");
        write_engine(&mut w, &self.engine);
        w.blank();
        w.comment("height");
        let h = &self.height;
        w.put("height.focal_f", h.focal_f);
        w.put("height.alpha", h.alpha);
        w.put("height.camera_h", h.camera_h);
        w.put("height.h_min", h.h_min);
        w.put("height.h_max", h.h_max);
        w.put("height.theta_min", h.theta_min);
        w.put("height.theta_max", h.theta_max);
        w.put("height.right_offset", h.right_offset);
        w.put("height.average_count", h.average_count);
        w.blank();
        w.comment("session");
        let s = &self.session;
        w.put("session.joint_velocity", s.joint_velocity);
        w.put("session.release_eps_frac", s.release_eps_frac);
        w.put("session.min_contact_rise", s.min_contact_rise);
        match s.release_debounce {
            Some(d) => w.put("session.release_debounce", d),
            None => w.put("session.release_debounce", "off"),
        }
        w.put(
            "session.proactive_trigger",
            match s.proactive_trigger {
                ProactiveTrigger::ConsecutiveHolds => "consecutive_holds",
                ProactiveTrigger::WallClock => "wall_clock",
            },
        );
        w.put("session.kinematics.rub_lift", s.kinematics.rub_lift);
        w.put("session.kinematics.pat_elbow", s.kinematics.pat_elbow);
        w.put("session.kinematics.squeeze_shoulder", s.kinematics.squeeze_shoulder);
        w.put("session.kinematics.squeeze_elbow", s.kinematics.squeeze_elbow);
        for (table, values) in [
            ("rest_pose", &s.rest_pose),
            ("closing_goal", &s.closing_goal),
            ("embrace_threshold", &s.embrace_threshold),
        ] {
            for i in 0..JOINT_COUNT {
                w.put(&format!("session.{table}.{}", JointId::ALL[i]), values[i]);
            }
        }
        w.blank();
        w.comment("forest");
        let f = &self.forest;
        w.put("forest.n_trees", f.n_trees);
        match f.max_depth {
            Some(d) => w.put("forest.max_depth", d),
            None => w.put("forest.max_depth", "none"),
        }
        w.put("forest.min_leaf", f.min_leaf);
        w.put("forest.features_per_split", f.features_per_split);
        w.put("forest.bootstrap", f.bootstrap);
        w.put("forest.seed", f.seed);
        w.blank();
        w.comment("policy");
        match self.fallback {
            Some(g) => w.put("policy.fallback", g),
            None => w.put("policy.fallback", "none"),
        }
        if let Some(r) = &self.ratings {
            for a in GestureClass::ALL {
                let row = r.row(a).map(|v| v.to_string()).join(", ");
                w.put(&format!("ratings.{a}"), row);
            }
        }
        w.finish()
    }
}

fn write_engine(w: &mut kv::Writer, p: &EngineParams) {
    w.put("window_w", p.window_w);
    w.put("overlap_o", p.overlap_o);
    w.put("label_threshold_t", p.label_threshold_t);
    w.put("stride_rt", p.stride_rt);
    w.put("baseline_len", p.baseline_len);
    w.put("sample_rate", p.sample_rate);
    w.put("eta", p.eta);
    w.put("m_exponent", p.m_exponent);
    w.put("deaf_window", p.deaf_window);
    w.put("proactive_delay", p.proactive_delay);
    w.put("torque_release_embrace", p.torque_release_embrace);
    w.put("torque_release_gesture", p.torque_release_gesture);
    w.put("torque_ma_window", p.torque_ma_window);
    w.put("gesture_duration", p.gesture_duration);
}

/// Engine parameters alone in config-file form.
pub fn params_to_text(p: &EngineParams) -> String {
    let mut w = kv::Writer::default();
    write_engine(&mut w, p);
    w.finish()
}
