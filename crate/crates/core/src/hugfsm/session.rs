//! Hug-session controller.
//!
//! ```text
//! Idle --user detected--> Inviting --user approaching--> Closing
//! Closing --all joints stopped or at goal--> Embrace
//! Embrace --rub/pat--> RespondingDiscrete --deaf window over--> Embrace
//! Embrace --squeeze, squeeze chosen--> SqueezeState --hold--> Embrace
//! Embrace --hold x N--> proactive gesture
//! any embraced state --release trigger--> Releasing --arms open--> Done
//! ```
//!
//! A timed (fixed-length) robot squeeze blocks the controller: release
//! triggers arriving during it are held until it finishes.

use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::robot::{
    make_gesture, modal_squeeze, GestureCommand, GestureKinematics, JointId, JointKind, JointState, JOINT_COUNT,
};
use crate::behave::{ChoiceContext, ResponsePolicy};
use crate::detect::Detection;
use crate::height::ShoulderAngles;
use crate::params::EngineParams;
use crate::types::{GestureClass, SensorSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionState {
    Idle,
    Inviting,
    Closing,
    Embrace,
    /// Executing (or just finished) a discrete response; detections before
    /// `deadline` are ignored.
    RespondingDiscrete { deadline: f64 },
    /// Duration-matched squeeze. `layered_until` is the deaf window of a
    /// rub or pat performed on top of it.
    SqueezeState { layered_until: Option<f64> },
    /// Fixed-length blocking squeeze. `then_deaf_until` continues the deaf
    /// window of the response it belongs to, if any.
    TimedSqueeze { deadline: f64, then_deaf_until: Option<f64> },
    Releasing,
    Done,
}

/// Payload-free name of a [`SessionState`], used in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StateName {
    Idle,
    Inviting,
    Closing,
    Embrace,
    RespondingDiscrete,
    SqueezeState,
    TimedSqueeze,
    Releasing,
    Done,
}

impl SessionState {
    pub fn name(&self) -> StateName {
        match self {
            Self::Idle => StateName::Idle,
            Self::Inviting => StateName::Inviting,
            Self::Closing => StateName::Closing,
            Self::Embrace => StateName::Embrace,
            Self::RespondingDiscrete { .. } => StateName::RespondingDiscrete,
            Self::SqueezeState { .. } => StateName::SqueezeState,
            Self::TimedSqueeze { .. } => StateName::TimedSqueeze,
            Self::Releasing => StateName::Releasing,
            Self::Done => StateName::Done,
        }
    }

    /// States in which the user is held and gestures are being handled.
    pub fn is_embraced(&self) -> bool {
        matches!(
            self,
            Self::Embrace | Self::RespondingDiscrete { .. } | Self::SqueezeState { .. } | Self::TimedSqueeze { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReleaseCause {
    Torque { joint: JointId, torque: f64 },
    Pressure,
}

/// What starts the proactive gesture timer running out.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProactiveTrigger {
    /// `round(proactive_delay * detection rate)` consecutive hold detections.
    ConsecutiveHolds,
    /// Hold detections spanning at least `proactive_delay` seconds.
    WallClock,
}

/// Robot-specific settings that have no published value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SessionConfig {
    /// Arm speed while inviting, closing and releasing, degrees per second.
    pub joint_velocity: f64,
    /// Resting pose, degrees, indexed by [`JointId::index`].
    pub rest_pose: [f64; JOINT_COUNT],
    /// Closing goal sized so no user fits inside it.
    pub closing_goal: [f64; JOINT_COUNT],
    /// Averaged torque at which a closing joint stops, Nm.
    pub embrace_threshold: [f64; JOINT_COUNT],
    /// Pressure release fires when the rise over the resting pressure falls
    /// to this fraction of the peak rise seen during the hug.
    pub release_eps_frac: f64,
    /// Peak rise needed before pressure release is armed, sensor units.
    pub min_contact_rise: f64,
    /// Seconds the pressure must stay low before releasing; `None` releases at once.
    pub release_debounce: Option<f64>,
    pub proactive_trigger: ProactiveTrigger,
    pub kinematics: GestureKinematics,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let mut closing_goal = [0.0; JOINT_COUNT];
        let mut embrace_threshold = [f64::INFINITY; JOINT_COUNT];
        for j in JointId::ALL {
            let (goal, thr) = match j.kind {
                JointKind::ShoulderLift => (45.0, f64::INFINITY),
                JointKind::ShoulderFlex => (85.0, 12.0),
                JointKind::ElbowFlex => (110.0, 10.0),
                JointKind::Wrist => (30.0, f64::INFINITY),
            };
            closing_goal[j.index()] = goal;
            embrace_threshold[j.index()] = thr;
        }
        Self {
            joint_velocity: 35.0,
            rest_pose: [0.0; JOINT_COUNT],
            closing_goal,
            embrace_threshold,
            release_eps_frac: 0.02,
            min_contact_rise: 3.0,
            release_debounce: None,
            proactive_trigger: ProactiveTrigger::ConsecutiveHolds,
            kinematics: GestureKinematics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "payload", rename_all = "snake_case"))]
pub enum EventPayload {
    Detection {
        label: GestureClass,
        acted: bool,
    },
    ResponseChosen {
        action: GestureClass,
        response: GestureClass,
        layered: bool,
    },
    StateChange {
        from: StateName,
        to: StateName,
    },
    ReleaseTrigger {
        cause: ReleaseCause,
        deferred: bool,
    },
    ProactiveFired {
        response: GestureClass,
    },
    JointStopped {
        joint: JointId,
        angle: f64,
    },
    /// An event that does not apply in the current state.
    Ignored {
        event: String,
        state: StateName,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SessionEvent {
    pub t: f64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub payload: EventPayload,
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self.payload {
            EventPayload::Detection { .. } => "detection",
            EventPayload::ResponseChosen { .. } => "response_chosen",
            EventPayload::StateChange { .. } => "state_change",
            EventPayload::ReleaseTrigger { .. } => "release_trigger",
            EventPayload::ProactiveFired { .. } => "proactive_fired",
            EventPayload::JointStopped { .. } => "joint_stopped",
            EventPayload::Ignored { .. } => "ignored",
        }
    }
}

/// Tracks chamber pressure against its pre-contact resting level.
#[derive(Debug, Clone)]
struct PressureMonitor {
    rest_sum: f64,
    rest_n: usize,
    peak_rise: f64,
    low_since: Option<f64>,
}

impl PressureMonitor {
    fn new() -> Self {
        Self { rest_sum: 0.0, rest_n: 0, peak_rise: 0.0, low_since: None }
    }

    fn observe_rest(&mut self, p: f64) {
        self.rest_sum += p;
        self.rest_n += 1;
    }

    fn rest(&self) -> Option<f64> {
        (self.rest_n > 0).then(|| self.rest_sum / self.rest_n as f64)
    }

    /// Returns true once the pressure has fallen back to rest for long enough.
    fn observe(&mut self, t: f64, p: f64, cfg: &SessionConfig) -> bool {
        let Some(rest) = self.rest() else {
            self.observe_rest(p);
            return false;
        };
        let rise = p - rest;
        self.peak_rise = self.peak_rise.max(rise);
        if self.peak_rise < cfg.min_contact_rise {
            return false;
        }
        if rise > cfg.release_eps_frac * self.peak_rise {
            self.low_since = None;
            return false;
        }
        let since = *self.low_since.get_or_insert(t);
        cfg.release_debounce.is_none_or(|d| t - since >= d)
    }
}

/// One hug interaction, from invitation to release.
pub struct HugSession<R> {
    params: EngineParams,
    config: SessionConfig,
    policy: ResponsePolicy,
    rng: R,
    state: SessionState,
    joints: [JointState; JOINT_COUNT],
    torque_history: [Vec<f64>; JOINT_COUNT],
    now: f64,
    hug_started_at: Option<f64>,
    hold_streak: usize,
    hold_streak_since: Option<f64>,
    gesture_until: Option<f64>,
    pending_release: Option<ReleaseCause>,
    pressure: PressureMonitor,
    log: Vec<SessionEvent>,
}

impl<R: RngCore> HugSession<R> {
    pub fn new(params: EngineParams, config: SessionConfig, policy: ResponsePolicy, rng: R) -> Self {
        let joints = core::array::from_fn(|i| JointState {
            id: JointId::ALL[i],
            angle: config.rest_pose[i],
            torque: 0.0,
            goal: config.rest_pose[i],
            stopped: false,
        });
        Self {
            params,
            config,
            policy,
            rng,
            state: SessionState::Idle,
            joints,
            torque_history: Default::default(),
            now: 0.0,
            hug_started_at: None,
            hold_streak: 0,
            hold_streak_since: None,
            gesture_until: None,
            pending_release: None,
            pressure: PressureMonitor::new(),
            log: Vec::new(),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn joints(&self) -> &[JointState; JOINT_COUNT] {
        &self.joints
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    pub fn into_log(self) -> Vec<SessionEvent> {
        self.log
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// When the arms started closing, i.e. when the detector should start baselining.
    pub fn hug_started_at(&self) -> Option<f64> {
        self.hug_started_at
    }

    /// Consecutive hold detections seen in the current streak.
    pub fn hold_streak(&self) -> usize {
        self.hold_streak
    }

    /// Whether a robot gesture is being executed at time `t`.
    pub fn gesture_active(&self, t: f64) -> bool {
        matches!(self.state, SessionState::SqueezeState { .. } | SessionState::TimedSqueeze { .. })
            || self.gesture_until.is_some_and(|u| t < u)
    }

    fn record(&mut self, t: f64, payload: EventPayload) {
        self.log.push(SessionEvent { t, payload });
    }

    fn enter(&mut self, t: f64, next: SessionState) {
        let from = self.state.name();
        self.state = next;
        if from != next.name() {
            self.record(t, EventPayload::StateChange { from, to: next.name() });
        }
    }

    fn ignored(&mut self, t: f64, event: &'static str) {
        let state = self.state.name();
        self.record(t, EventPayload::Ignored { event: event.into(), state });
    }

    /// Set the shoulder-lift goals from the user's estimated height.
    pub fn set_arm_height(&mut self, angles: ShoulderAngles) {
        for j in &mut self.joints {
            if j.id.kind == JointKind::ShoulderLift {
                let angle = match j.id.arm {
                    super::robot::Arm::Left => angles.left,
                    super::robot::Arm::Right => angles.right,
                };
                self.config.closing_goal[j.id.index()] = angle;
                if matches!(self.state, SessionState::Inviting) {
                    j.goal = angle;
                }
            }
        }
    }

    /// A person was seen: lift the arms and ask for a hug.
    pub fn on_user_detected(&mut self, t: f64) {
        self.now = self.now.max(t);
        if self.state != SessionState::Idle {
            return self.ignored(t, "user_detected");
        }
        for j in &mut self.joints {
            if j.id.kind == JointKind::ShoulderLift {
                j.goal = self.config.closing_goal[j.id.index()];
            }
        }
        self.enter(t, SessionState::Inviting);
    }

    /// The invited user walks toward the robot: start closing the arms.
    /// Inviting waits indefinitely for this.
    pub fn on_user_approaching(&mut self, t: f64) {
        self.now = self.now.max(t);
        if self.state != SessionState::Inviting {
            return self.ignored(t, "user_approaching");
        }
        for j in &mut self.joints {
            j.goal = self.config.closing_goal[j.id.index()];
            j.stopped = false;
        }
        for h in &mut self.torque_history {
            h.clear();
        }
        self.hug_started_at = Some(t);
        self.enter(t, SessionState::Closing);
    }

    /// Advance time to `t` with the latest joint torques.
    pub fn tick(&mut self, t: f64, torques: &[f64; JOINT_COUNT]) {
        let dt = (t - self.now).max(0.0);
        self.now = t;
        for (j, &tau) in self.joints.iter_mut().zip(torques) {
            j.torque = tau;
        }
        self.expire_timers(t);
        match self.state {
            SessionState::Idle | SessionState::Done => {}
            SessionState::Inviting => self.move_joints(dt),
            SessionState::Closing => self.close_step(t, dt, torques),
            SessionState::Releasing => {
                for i in 0..JOINT_COUNT {
                    self.joints[i].goal = self.config.rest_pose[i];
                }
                self.move_joints(dt);
                if self.joints.iter().all(JointState::at_goal) {
                    self.enter(t, SessionState::Done);
                }
            }
            _ => self.check_torque_release(t, torques),
        }
    }

    fn move_joints(&mut self, dt: f64) {
        let step = self.config.joint_velocity * dt;
        for j in &mut self.joints {
            j.advance(step);
        }
    }

    fn close_step(&mut self, t: f64, dt: f64, torques: &[f64; JOINT_COUNT]) {
        let window = self.params.torque_ma_window;
        for i in 0..JOINT_COUNT {
            let hist = &mut self.torque_history[i];
            if hist.len() == window {
                hist.remove(0);
            }
            hist.push(torques[i]);
            let joint = &mut self.joints[i];
            if joint.stopped || hist.len() < window {
                continue;
            }
            let avg = hist.iter().sum::<f64>() / window as f64;
            if avg > self.config.embrace_threshold[i] {
                joint.stop_here();
                let (id, angle) = (joint.id, joint.angle);
                self.record(t, EventPayload::JointStopped { joint: id, angle });
            }
        }
        self.move_joints(dt);
        if self.joints.iter().all(|j| j.stopped || j.at_goal()) {
            self.enter(t, SessionState::Embrace);
        }
    }

    fn release_threshold(&self, t: f64) -> f64 {
        if self.gesture_active(t) {
            self.params.torque_release_gesture
        } else {
            self.params.torque_release_embrace
        }
    }

    fn check_torque_release(&mut self, t: f64, torques: &[f64; JOINT_COUNT]) {
        let limit = self.release_threshold(t);
        // Single readings, no averaging, so the user is let go without delay.
        if let Some(i) = (0..JOINT_COUNT).find(|&i| torques[i] > limit) {
            let cause = ReleaseCause::Torque { joint: JointId::ALL[i], torque: torques[i] };
            self.trigger_release(t, cause);
        }
    }

    /// Feed one chamber pressure sample; pressure returning to its resting
    /// level while embraced releases the user.
    pub fn on_pressure(&mut self, sample: &SensorSample) {
        match self.state {
            SessionState::Idle | SessionState::Inviting => self.pressure.observe_rest(sample.pressure),
            SessionState::Releasing | SessionState::Done => {}
            SessionState::Closing => {
                self.pressure.observe(sample.t, sample.pressure, &self.config);
            }
            _ => {
                if self.pressure.observe(sample.t, sample.pressure, &self.config) {
                    self.on_pressure_release(sample.t);
                }
            }
        }
    }

    /// The user let go of the robot's back.
    pub fn on_pressure_release(&mut self, t: f64) {
        self.trigger_release(t, ReleaseCause::Pressure);
    }

    fn trigger_release(&mut self, t: f64, cause: ReleaseCause) {
        match self.state {
            SessionState::TimedSqueeze { .. } => {
                if self.pending_release.is_none() {
                    self.pending_release = Some(cause);
                    self.record(t, EventPayload::ReleaseTrigger { cause, deferred: true });
                }
            }
            SessionState::Closing
            | SessionState::Embrace
            | SessionState::RespondingDiscrete { .. }
            | SessionState::SqueezeState { .. } => {
                self.record(t, EventPayload::ReleaseTrigger { cause, deferred: false });
                self.gesture_until = None;
                self.enter(t, SessionState::Releasing);
            }
            _ => self.ignored(t, "release"),
        }
    }

    fn expire_timers(&mut self, t: f64) {
        if self.gesture_until.is_some_and(|u| t >= u) {
            self.gesture_until = None;
        }
        match self.state {
            SessionState::RespondingDiscrete { deadline } if t >= deadline => {
                self.enter(t, SessionState::Embrace);
            }
            SessionState::SqueezeState { layered_until: Some(u) } if t >= u => {
                self.state = SessionState::SqueezeState { layered_until: None };
            }
            SessionState::TimedSqueeze { deadline, then_deaf_until } if t >= deadline => {
                if let Some(cause) = self.pending_release.take() {
                    self.record(t, EventPayload::ReleaseTrigger { cause, deferred: false });
                    self.enter(t, SessionState::Releasing);
                } else {
                    match then_deaf_until {
                        Some(d) if t < d => self.enter(t, SessionState::RespondingDiscrete { deadline: d }),
                        _ => self.enter(t, SessionState::Embrace),
                    }
                }
            }
            _ => {}
        }
    }

    fn reset_hold_streak(&mut self) {
        self.hold_streak = 0;
        self.hold_streak_since = None;
    }

    fn command(&mut self, t: f64, kind: GestureClass) -> Option<GestureCommand> {
        let cmd = make_gesture(kind, &self.config.kinematics, self.params.gesture_duration).ok()?;
        self.gesture_until = Some(t + cmd.duration);
        Some(cmd)
    }

    /// Handle one classifier output. Returns the robot gesture to start, if any.
    pub fn on_detection(&mut self, d: &Detection) -> Option<GestureCommand> {
        let t = d.t;
        self.now = self.now.max(t);
        self.expire_timers(t);
        let acts = match self.state {
            SessionState::Embrace => true,
            SessionState::SqueezeState { layered_until } => layered_until.is_none(),
            _ => false,
        };
        self.record(t, EventPayload::Detection { label: d.label, acted: acts });
        if !acts {
            if !self.state.is_embraced() {
                self.ignored(t, "detection");
            }
            return None;
        }
        match self.state {
            SessionState::Embrace => self.detection_in_embrace(t, d.label),
            SessionState::SqueezeState { .. } => self.detection_in_squeeze(t, d.label),
            _ => None,
        }
    }

    fn detection_in_embrace(&mut self, t: f64, label: GestureClass) -> Option<GestureCommand> {
        if label == GestureClass::Hold {
            if self.hold_streak == 0 {
                self.hold_streak_since = Some(t);
            }
            self.hold_streak += 1;
            let due = match self.config.proactive_trigger {
                ProactiveTrigger::ConsecutiveHolds => self.hold_streak >= self.params.proactive_holds(),
                ProactiveTrigger::WallClock => {
                    self.hold_streak_since.is_some_and(|s| t - s >= self.params.proactive_delay)
                }
            };
            return if due { self.proactive_fire(t) } else { None };
        }
        self.reset_hold_streak();
        let response = self.choose(t, label, ChoiceContext::default(), false)?;
        if label == GestureClass::Squeeze && response == GestureClass::Squeeze {
            self.enter(t, SessionState::SqueezeState { layered_until: None });
            return Some(modal_squeeze(true, &self.config.kinematics, self.params.gesture_duration));
        }
        self.respond_discrete(t, response)
    }

    fn detection_in_squeeze(&mut self, t: f64, label: GestureClass) -> Option<GestureCommand> {
        match label {
            GestureClass::Squeeze => None,
            GestureClass::Hold => {
                self.reset_hold_streak();
                self.gesture_until = None;
                self.enter(t, SessionState::Embrace);
                Some(modal_squeeze(false, &self.config.kinematics, self.params.gesture_duration))
            }
            GestureClass::Rub | GestureClass::Pat => {
                let ctx = ChoiceContext { in_squeeze_state: true };
                let response = self.choose(t, label, ctx, true)?;
                self.state = SessionState::SqueezeState { layered_until: Some(t + self.params.deaf_window) };
                if response == GestureClass::Hold {
                    None
                } else {
                    self.command(t, response)
                }
            }
        }
    }

    fn choose(&mut self, t: f64, action: GestureClass, ctx: ChoiceContext, layered: bool) -> Option<GestureClass> {
        match self.policy.choose(action, ctx, &mut self.rng) {
            Ok(response) => {
                self.record(t, EventPayload::ResponseChosen { action, response, layered });
                Some(response)
            }
            Err(_) => {
                self.ignored(t, "degenerate_policy_row");
                None
            }
        }
    }

    /// Start a fixed-duration response and go deaf for the deaf window.
    fn respond_discrete(&mut self, t: f64, response: GestureClass) -> Option<GestureCommand> {
        let deaf_until = t + self.params.deaf_window;
        match response {
            GestureClass::Hold => {
                self.enter(t, SessionState::RespondingDiscrete { deadline: deaf_until });
                None
            }
            GestureClass::Rub | GestureClass::Pat => {
                self.enter(t, SessionState::RespondingDiscrete { deadline: deaf_until });
                self.command(t, response)
            }
            GestureClass::Squeeze => {
                let cmd = self.command(t, response)?;
                let deadline = t + cmd.duration;
                self.enter(t, SessionState::TimedSqueeze { deadline, then_deaf_until: Some(deaf_until) });
                Some(cmd)
            }
        }
    }

    /// Robot-initiated gesture after a sustained hold. A drawn hold is a
    /// logged no-op; any gesture runs for its own duration, after which the
    /// hold count starts again from zero.
    fn proactive_fire(&mut self, t: f64) -> Option<GestureCommand> {
        self.reset_hold_streak();
        let Some(response) = self.policy.choose(GestureClass::Hold, ChoiceContext::default(), &mut self.rng).ok() else {
            self.ignored(t, "degenerate_policy_row");
            return None;
        };
        self.record(t, EventPayload::ProactiveFired { response });
        match response {
            GestureClass::Hold => None,
            GestureClass::Rub | GestureClass::Pat => {
                let cmd = self.command(t, response)?;
                self.enter(t, SessionState::RespondingDiscrete { deadline: t + cmd.duration });
                Some(cmd)
            }
            GestureClass::Squeeze => {
                let cmd = self.command(t, response)?;
                self.enter(t, SessionState::TimedSqueeze { deadline: t + cmd.duration, then_deaf_until: None });
                Some(cmd)
            }
        }
    }
}
