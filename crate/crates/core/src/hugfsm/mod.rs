//! Hug-session state machine and robot gesture commands.

pub mod robot;
pub mod session;

pub use robot::{
    make_gesture, modal_squeeze, Arm, CommandPhase, GestureCommand, GestureKinematics, JointId, JointKind, JointState,
    NotAMotion, Waypoint, JOINT_COUNT,
};
pub use session::{
    EventPayload, HugSession, ProactiveTrigger, ReleaseCause, SessionConfig, SessionEvent, SessionState, StateName,
};
