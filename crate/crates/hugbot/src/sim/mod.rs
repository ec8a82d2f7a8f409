//! Virtual user and virtual arms for running sessions without hardware.

pub mod corpus;
pub mod robot;
pub mod run;
pub mod script;
pub mod signal;

pub use corpus::{annotate, generate_corpus, generate_corpus_with, HugTiming};
pub use robot::VirtualRobot;
pub use run::{log_to_jsonl, run_session, LogCounts, SessionSummary, SimError, SimOutcome, SimSetup};
pub use script::{PlannedGesture, ScriptError, TimedObservation, UserScript};
pub use signal::{SignalModel, Stroke, Timeline, UserProfile};
