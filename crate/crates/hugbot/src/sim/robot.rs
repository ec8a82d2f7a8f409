//! Virtual arms wrapped around a virtual torso.

use hug_core::hugfsm::{CommandPhase, GestureCommand, JointId, JointKind, JointState, JOINT_COUNT};

/// Contact torque per degree of penetration into the torso, Nm.
pub const DEFAULT_STIFFNESS: f64 = 1.5;

/// Reference torso circumference for the contact-angle model, meters.
const REFERENCE_TORSO: f64 = 0.7;

/// Flexion joints meet the torso at an angle that shrinks as the torso grows.
/// Lift and wrist joints never touch it.
pub fn contact_angle(joint: JointId, torso: f64) -> Option<f64> {
    let d = torso - REFERENCE_TORSO;
    match joint.kind {
        JointKind::ShoulderFlex => Some(80.0 - 40.0 * d),
        JointKind::ElbowFlex => Some(105.0 - 60.0 * d),
        JointKind::ShoulderLift | JointKind::Wrist => None,
    }
}

#[derive(Debug, Clone)]
pub struct VirtualRobot {
    pub torso: f64,
    pub stiffness: f64,
    /// Offsets left in place by modal squeeze halves.
    held: [f64; JOINT_COUNT],
    running: Option<(GestureCommand, f64)>,
}

impl VirtualRobot {
    pub fn new(torso: f64) -> Self {
        Self { torso, stiffness: DEFAULT_STIFFNESS, held: [0.0; JOINT_COUNT], running: None }
    }

    /// Start `cmd` at time `t`, replacing any command still running.
    pub fn execute(&mut self, t: f64, cmd: GestureCommand) {
        if let Some((prev, _)) = self.running.take() {
            self.settle(&prev);
        }
        self.running = Some((cmd, t));
    }

    fn settle(&mut self, cmd: &GestureCommand) {
        if matches!(cmd.phase, CommandPhase::SqueezeOn | CommandPhase::SqueezeOff) {
            for (o, d) in self.held.iter_mut().zip(cmd.offset_at(f64::INFINITY)) {
                *o += d;
            }
        }
    }

    /// Drop the active command once it has run its course.
    fn expire(&mut self, t: f64) {
        if let Some((cmd, t0)) = &self.running {
            if t - t0 >= cmd.duration {
                let cmd = cmd.clone();
                self.settle(&cmd);
                self.running = None;
            }
        }
    }

    /// Offset on top of the controller's joint angles at time `t`.
    pub fn offsets(&mut self, t: f64) -> [f64; JOINT_COUNT] {
        self.expire(t);
        let mut off = self.held;
        if let Some((cmd, t0)) = &self.running {
            for (o, d) in off.iter_mut().zip(cmd.offset_at(t - t0)) {
                *o += d;
            }
        }
        off
    }

    pub fn torque_at(&self, joint: JointId, angle: f64) -> f64 {
        contact_angle(joint, self.torso).map_or(0.0, |c| self.stiffness * (angle - c).max(0.0))
    }

    /// Torques measured with the arms at `joints` plus any gesture offsets.
    pub fn torques(&mut self, t: f64, joints: &[JointState; JOINT_COUNT]) -> [f64; JOINT_COUNT] {
        let off = self.offsets(t);
        core::array::from_fn(|i| self.torque_at(joints[i].id, joints[i].angle + off[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hug_core::hugfsm::{make_gesture, modal_squeeze, GestureKinematics};
    use hug_core::GestureClass;

    const ELBOW: JointId = JointId::ALL[2];

    #[test]
    fn torque_is_zero_before_contact_and_monotone_after() {
        let r = VirtualRobot::new(0.9);
        let c = contact_angle(ELBOW, 0.9).unwrap();
        assert_eq!(r.torque_at(ELBOW, c - 5.0), 0.0);
        assert_eq!(r.torque_at(ELBOW, c), 0.0);
        let mut last = 0.0;
        for k in 1..20 {
            let tau = r.torque_at(ELBOW, c + k as f64);
            assert!(tau > last);
            last = tau;
        }
        assert_eq!(r.torque_at(JointId::ALL[0], 500.0), 0.0);
    }

    #[test]
    fn modal_squeeze_offsets_persist_until_undone() {
        let k = GestureKinematics::default();
        let mut r = VirtualRobot::new(0.9);
        r.execute(0.0, modal_squeeze(true, &k, 2.0));
        assert_eq!(r.offsets(5.0)[ELBOW.index()], 3.0);
        r.execute(5.0, make_gesture(GestureClass::Pat, &k, 2.0).unwrap());
        assert_eq!(r.offsets(5.1)[ELBOW.index()], 6.0);
        assert_eq!(r.offsets(8.0)[ELBOW.index()], 3.0);
        r.execute(9.0, modal_squeeze(false, &k, 2.0));
        assert_eq!(r.offsets(20.0), [0.0; JOINT_COUNT]);
    }

    #[test]
    fn interrupted_squeeze_half_still_counts() {
        let k = GestureKinematics::default();
        let mut r = VirtualRobot::new(0.9);
        r.execute(0.0, modal_squeeze(true, &k, 2.0));
        r.execute(0.5, make_gesture(GestureClass::Rub, &k, 2.0).unwrap());
        assert_eq!(r.offsets(10.0)[ELBOW.index()], 3.0);
    }
}
