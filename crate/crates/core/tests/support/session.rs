use hug_core::behave::{RatingMatrix, ResponsePolicy};
use hug_core::detect::Detection;
use hug_core::hugfsm::{EventPayload, GestureCommand, HugSession, SessionConfig, SessionState, JOINT_COUNT};
use hug_core::{EngineParams, GestureClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use GestureClass::*;

pub const DT: f64 = 1.0 / 45.0;

/// Policy that always answers `action` with `responses[action]` (and, inside a
/// modal squeeze, with `in_squeeze[action]`).
pub fn scripted_policy(responses: [GestureClass; 4], in_squeeze: [GestureClass; 4]) -> ResponsePolicy {
    let mut rows = [[0.0; 4]; 4];
    for a in GestureClass::ALL {
        rows[a.index()][responses[a.index()].index()] = 9.0;
        let alt = in_squeeze[a.index()];
        if alt != responses[a.index()] {
            rows[a.index()][alt.index()] = 6.0;
        }
    }
    ResponsePolicy::from_ratings(RatingMatrix { rows }, 5.0, 100.0, Some(Hold)).unwrap()
}

pub struct Harness {
    pub s: HugSession<ChaCha8Rng>,
    pub t: f64,
}

impl Harness {
    pub fn new(policy: ResponsePolicy) -> Self {
        Self::with_config(policy, SessionConfig::default())
    }

    pub fn with_config(policy: ResponsePolicy, config: SessionConfig) -> Self {
        let s = HugSession::new(EngineParams::default(), config, policy, ChaCha8Rng::seed_from_u64(9));
        Self { s, t: 0.0 }
    }

    /// Drive the session into Embrace with no contact torque.
    pub fn embraced(policy: ResponsePolicy) -> Self {
        let mut h = Self::new(policy);
        h.s.on_user_detected(0.0);
        h.s.on_user_approaching(0.5);
        h.t = 0.5;
        while h.s.state() != SessionState::Embrace {
            h.tick([0.0; JOINT_COUNT]);
            assert!(h.t < 30.0, "never embraced");
        }
        h
    }

    pub fn tick(&mut self, torques: [f64; JOINT_COUNT]) {
        self.t += DT;
        self.s.tick(self.t, &torques);
    }

    /// Advance by `secs` without torque.
    pub fn wait(&mut self, secs: f64) {
        let end = self.t + secs;
        while self.t < end {
            self.tick([0.0; JOINT_COUNT]);
        }
    }

    /// One detection, spaced like the real-time detector (10 samples apart).
    pub fn detect(&mut self, label: GestureClass) -> Option<GestureCommand> {
        for _ in 0..10 {
            self.tick([0.0; JOINT_COUNT]);
        }
        let p = {
            let mut p = [0.0; 4];
            p[label.index()] = 1.0;
            p
        };
        self.s.on_detection(&Detection { t: self.t, label, probabilities: p, window_start: 0 })
    }

    pub fn count(&self, pred: impl Fn(&EventPayload) -> bool) -> usize {
        self.s.log().iter().filter(|e| pred(&e.payload)).count()
    }
}

