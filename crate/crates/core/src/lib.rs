//! Perception and behavior core of an autonomous hugging robot.
//!
//! The crate is `no_std` + `alloc`. It covers:
//!
//! * [`featurize`]: per-hug baselines, overlapping windows and the
//!   80-statistic feature registry;
//! * [`forest`]: a random-forest gesture classifier;
//! * [`detect`]: the streaming detector that classifies the latest window
//!   every few samples;
//! * [`behave`]: the rating-derived probabilistic response policy;
//! * [`hugfsm`]: the hug-session state machine and gesture kinematics;
//! * [`height`]: user height estimation and arm placement.
//!
//! File formats, simulation and the command-line tool live in the `hugbot`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod behave;
pub mod detect;
pub mod featurize;
pub mod forest;
pub mod height;
pub mod hugfsm;
pub mod params;
pub mod rng;
pub mod types;

pub use params::EngineParams;
pub use types::{GestureClass, GestureInterval, HugRecording, SensorSample};
