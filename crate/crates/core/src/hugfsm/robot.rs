//! Arm joints and the joint-space gesture commands the robot executes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::types::GestureClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Arm {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum JointKind {
    ShoulderLift,
    ShoulderFlex,
    ElbowFlex,
    Wrist,
}

/// One commanded joint. Flexion angles grow as the arms close around the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointId {
    pub arm: Arm,
    pub kind: JointKind,
}

pub const JOINT_COUNT: usize = 8;

impl JointId {
    pub const fn new(arm: Arm, kind: JointKind) -> Self {
        Self { arm, kind }
    }

    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::new(Arm::Left, JointKind::ShoulderLift),
        JointId::new(Arm::Left, JointKind::ShoulderFlex),
        JointId::new(Arm::Left, JointKind::ElbowFlex),
        JointId::new(Arm::Left, JointKind::Wrist),
        JointId::new(Arm::Right, JointKind::ShoulderLift),
        JointId::new(Arm::Right, JointKind::ShoulderFlex),
        JointId::new(Arm::Right, JointKind::ElbowFlex),
        JointId::new(Arm::Right, JointKind::Wrist),
    ];

    pub fn index(self) -> usize {
        let arm = match self.arm {
            Arm::Left => 0,
            Arm::Right => 4,
        };
        arm + self.kind as usize
    }

    /// Joints whose torque sizes the embrace to the user.
    pub fn is_flexion(self) -> bool {
        matches!(self.kind, JointKind::ShoulderFlex | JointKind::ElbowFlex)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arm = match self.arm {
            Arm::Left => "left",
            Arm::Right => "right",
        };
        let kind = match self.kind {
            JointKind::ShoulderLift => "shoulder_lift",
            JointKind::ShoulderFlex => "shoulder_flex",
            JointKind::ElbowFlex => "elbow_flex",
            JointKind::Wrist => "wrist",
        };
        write!(f, "{arm}_{kind}")
    }
}

/// Commanded and measured state of one joint, degrees and Nm.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointState {
    pub id: JointId,
    pub angle: f64,
    pub torque: f64,
    pub goal: f64,
    /// Set when contact torque halted the joint; `goal` then equals the stop angle.
    pub stopped: bool,
}

impl JointState {
    pub fn at_goal(&self) -> bool {
        self.angle == self.goal
    }

    /// Move toward `goal` by at most `step` degrees.
    pub fn advance(&mut self, step: f64) {
        let delta = self.goal - self.angle;
        if delta.abs() <= step {
            self.angle = self.goal;
        } else {
            self.angle += step.copysign(delta);
        }
    }

    pub fn stop_here(&mut self) {
        self.goal = self.angle;
        self.stopped = true;
    }
}

/// Simultaneous joint offsets held for `dwell` seconds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Waypoint {
    /// Relative moves in degrees, applied to the current pose.
    pub deltas: Vec<(JointId, f64)>,
    pub dwell: f64,
}

/// Which part of a robot gesture a command carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CommandPhase {
    /// A fixed-duration gesture that ends in its starting pose.
    Complete,
    /// Entry into a duration-matched squeeze.
    SqueezeOn,
    /// Exit from a duration-matched squeeze.
    SqueezeOff,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GestureCommand {
    pub kind: GestureClass,
    pub phase: CommandPhase,
    pub waypoints: Vec<Waypoint>,
    pub duration: f64,
    /// The controller cannot be interrupted while this runs.
    pub blocking: bool,
}

impl GestureCommand {
    /// Net displacement the command leaves on `joint`.
    pub fn net_delta(&self, joint: JointId) -> f64 {
        self.waypoints
            .iter()
            .flat_map(|w| w.deltas.iter())
            .filter(|(j, _)| *j == joint)
            .map(|(_, d)| d)
            .sum()
    }

    /// Joints touched by any waypoint, in first-use order.
    pub fn joints(&self) -> Vec<JointId> {
        let mut out: Vec<JointId> = Vec::new();
        for (j, _) in self.waypoints.iter().flat_map(|w| w.deltas.iter()) {
            if !out.contains(j) {
                out.push(*j);
            }
        }
        out
    }

    /// Offset of every joint `elapsed` seconds into the command.
    pub fn offset_at(&self, elapsed: f64) -> [f64; JOINT_COUNT] {
        let mut off = [0.0; JOINT_COUNT];
        let mut t = 0.0;
        for w in &self.waypoints {
            if elapsed < t {
                break;
            }
            for (j, d) in &w.deltas {
                off[j.index()] += d;
            }
            t += w.dwell;
        }
        off
    }
}

/// Gesture amplitudes, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GestureKinematics {
    pub rub_lift: f64,
    pub pat_elbow: f64,
    pub squeeze_shoulder: f64,
    pub squeeze_elbow: f64,
}

impl Default for GestureKinematics {
    fn default() -> Self {
        Self { rub_lift: 3.0, pat_elbow: 3.0, squeeze_shoulder: 1.0, squeeze_elbow: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0} is not a motion gesture")]
pub struct NotAMotion(pub GestureClass);

const LEFT_LIFT: JointId = JointId::new(Arm::Left, JointKind::ShoulderLift);
const LEFT_ELBOW: JointId = JointId::new(Arm::Left, JointKind::ElbowFlex);

fn evenly(steps: Vec<Vec<(JointId, f64)>>, duration: f64) -> Vec<Waypoint> {
    let dwell = duration / steps.len() as f64;
    steps.into_iter().map(|deltas| Waypoint { deltas, dwell }).collect()
}

fn squeeze_deltas(k: &GestureKinematics, sign: f64) -> Vec<(JointId, f64)> {
    [Arm::Left, Arm::Right]
        .into_iter()
        .flat_map(|arm| {
            [
                (JointId::new(arm, JointKind::ShoulderFlex), sign * k.squeeze_shoulder),
                (JointId::new(arm, JointKind::ElbowFlex), sign * k.squeeze_elbow),
            ]
        })
        .collect()
}

/// Fixed-duration, pose-neutral command for a robot rub, pat or squeeze.
pub fn make_gesture(kind: GestureClass, k: &GestureKinematics, duration: f64) -> Result<GestureCommand, NotAMotion> {
    let steps = match kind {
        GestureClass::Hold => return Err(NotAMotion(kind)),
        GestureClass::Rub => {
            let a = k.rub_lift;
            vec![vec![(LEFT_LIFT, a)], vec![(LEFT_LIFT, -a)], vec![(LEFT_LIFT, a)], vec![(LEFT_LIFT, -a)]]
        }
        GestureClass::Pat => {
            let a = k.pat_elbow;
            vec![
                vec![(LEFT_ELBOW, a)],
                vec![(LEFT_ELBOW, -2.0 * a)],
                vec![(LEFT_ELBOW, 2.0 * a)],
                vec![(LEFT_ELBOW, -2.0 * a)],
                vec![(LEFT_ELBOW, a)],
            ]
        }
        GestureClass::Squeeze => vec![squeeze_deltas(k, 1.0), squeeze_deltas(k, -1.0)],
    };
    Ok(GestureCommand {
        kind,
        phase: CommandPhase::Complete,
        waypoints: evenly(steps, duration),
        duration,
        // A timed squeeze runs to completion; rubs and pats can be overridden.
        blocking: kind == GestureClass::Squeeze,
    })
}

/// Half of a duration-matched squeeze: tighten (`on`) or loosen.
pub fn modal_squeeze(on: bool, k: &GestureKinematics, duration: f64) -> GestureCommand {
    let (sign, phase) = if on { (1.0, CommandPhase::SqueezeOn) } else { (-1.0, CommandPhase::SqueezeOff) };
    GestureCommand {
        kind: GestureClass::Squeeze,
        phase,
        waypoints: vec![Waypoint { deltas: squeeze_deltas(k, sign), dwell: duration / 2.0 }],
        duration: duration / 2.0,
        blocking: false,
    }
}
