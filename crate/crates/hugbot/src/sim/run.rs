//! Closed-loop session: virtual user, detector, controller and arms on one
//! virtual clock.

use std::collections::BTreeMap;

use hug_core::behave::ResponsePolicy;
use hug_core::detect::{DetectError, Detector, GestureClassifier};
use hug_core::height::{shoulder_angles, HeightAverager, HeightCalib, HeightError};
use hug_core::hugfsm::{EventPayload, HugSession, ReleaseCause, SessionConfig, SessionEvent, SessionState, StateName};
use hug_core::rng::derive_seed;
use hug_core::{EngineParams, GestureClass, HugRecording};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::robot::VirtualRobot;
use super::corpus::annotate;
use super::script::UserScript;
use super::signal::{SignalModel, Stroke, Timeline};

/// Seconds the simulation keeps running after the user lets go.
pub const RELEASE_GRACE: f64 = 15.0;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("script never produces a height estimate ({0} observations, need {1})")]
    NoHeight(usize, usize),
    #[error("height observation: {0}")]
    Height(#[from] HeightError),
    #[error("detector: {0}")]
    Detect(#[from] DetectError),
}

pub struct SimSetup<'a> {
    pub params: EngineParams,
    pub session: SessionConfig,
    pub calib: HeightCalib,
    pub signal: SignalModel,
    pub policy: ResponsePolicy,
    pub classifier: &'a dyn GestureClassifier,
}

/// Event counts of one session log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogCounts {
    pub detections: BTreeMap<&'static str, usize>,
    pub responses: BTreeMap<&'static str, usize>,
    pub layered_responses: usize,
    pub proactive_fires: usize,
    pub squeeze_state_entries: usize,
    pub release_cause: Option<ReleaseCause>,
}

impl LogCounts {
    pub fn of(log: &[SessionEvent]) -> Self {
        let zero: BTreeMap<&'static str, usize> = GestureClass::ALL.iter().map(|g| (g.name(), 0)).collect();
        let mut c = Self {
            detections: zero.clone(),
            responses: zero,
            layered_responses: 0,
            proactive_fires: 0,
            squeeze_state_entries: 0,
            release_cause: None,
        };
        for e in log {
            match &e.payload {
                EventPayload::Detection { label, .. } => *c.detections.entry(label.name()).or_default() += 1,
                EventPayload::ResponseChosen { response, layered, .. } => {
                    *c.responses.entry(response.name()).or_default() += 1;
                    c.layered_responses += usize::from(*layered);
                }
                EventPayload::ProactiveFired { .. } => c.proactive_fires += 1,
                EventPayload::StateChange { to: StateName::SqueezeState, .. } => c.squeeze_state_entries += 1,
                EventPayload::ReleaseTrigger { cause, deferred: false } => {
                    c.release_cause = c.release_cause.or(Some(*cause));
                }
                _ => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub seed: u64,
    pub height_estimate: f64,
    pub hug_start: f64,
    pub end_time: f64,
    pub final_state: StateName,
    #[serde(flatten)]
    pub counts: LogCounts,
}

pub struct SimOutcome {
    pub log: Vec<SessionEvent>,
    pub recording: HugRecording,
    pub summary: SessionSummary,
}

/// First tick index whose time is at or after `t`.
fn first_tick_at(t: f64, rate: f64) -> usize {
    let mut i = (t * rate).floor().max(0.0) as usize;
    while (i as f64) / rate < t {
        i += 1;
    }
    i
}

pub fn run_session(script: &UserScript, setup: &SimSetup<'_>) -> Result<SimOutcome, SimError> {
    let rate = setup.params.sample_rate;
    let observations = script.effective_observations(&setup.calib);

    // When the camera has seen the user often enough to trust the height.
    let mut averager = HeightAverager::new(setup.calib);
    let mut seen = None;
    for (k, o) in observations.iter().enumerate() {
        if let Some(h) = averager.push(&o.obs)? {
            seen = Some((k, o.t, h));
            break;
        }
    }
    let Some((seen_index, t_seen, height)) = seen else {
        return Err(SimError::NoHeight(observations.len(), setup.calib.average_count));
    };
    let start_tick = first_tick_at(script.approach_at.max(t_seen), rate);
    let hug_start = start_tick as f64 / rate;
    let release_abs = hug_start + script.release_at;

    let timeline = Timeline {
        contact_at: hug_start,
        release_at: release_abs,
        end: release_abs + RELEASE_GRACE,
        strokes: script
            .plan
            .iter()
            .map(|g| Stroke { label: g.label, t_start: hug_start + g.t_start, duration: g.duration, intensity: g.intensity })
            .collect(),
    };
    let mut signal_rng = ChaCha8Rng::seed_from_u64(derive_seed(script.seed, 0));
    let user = setup.signal.draw_user(&mut signal_rng);
    let samples = setup.signal.render(&user, &timeline, &mut signal_rng);

    let policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(script.seed, 1));
    let mut session = HugSession::new(setup.params, setup.session.clone(), setup.policy.clone(), policy_rng);
    let mut detector = Detector::new(setup.classifier, &setup.params);
    let mut robot = VirtualRobot::new(script.torso);
    let mut observed = 0;
    let mut detected = false;
    let mut end_time = 0.0;

    for (i, sample) in samples.iter().enumerate() {
        let t = sample.t;
        end_time = t;
        while observed < observations.len() && observations[observed].t <= t {
            observed += 1;
        }
        if !detected && observed > seen_index {
            detected = true;
            session.on_user_detected(t);
            session.set_arm_height(shoulder_angles(height, &setup.calib));
        }
        if i == start_tick {
            session.on_user_approaching(t);
            detector.hug_started();
        }
        let torques = robot.torques(t, session.joints());
        session.tick(t, &torques);
        session.on_pressure(sample);
        if i >= start_tick {
            if let Some(d) = detector.push(*sample)? {
                if let Some(cmd) = session.on_detection(&d) {
                    robot.execute(t, cmd);
                }
            }
        }
        if session.state() == SessionState::Done {
            break;
        }
    }

    let n = samples.iter().take_while(|s| s.t <= end_time).count();
    let recording = HugRecording {
        samples: samples[..n].to_vec(),
        annotations: annotate(&timeline.strokes),
        hug_start,
        hug_end: release_abs.min(end_time),
        participant_id: format!("sim{}", script.seed),
    };
    let final_state = session.state().name();
    let log = session.into_log();
    let summary = SessionSummary {
        seed: script.seed,
        height_estimate: height,
        hug_start,
        end_time,
        final_state,
        counts: LogCounts::of(&log),
    };
    Ok(SimOutcome { log, recording, summary })
}

/// One JSON object per event.
pub fn log_to_jsonl(log: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("session events always serialize"));
        out.push('\n');
    }
    out
}
