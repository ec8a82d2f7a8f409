//! File formats, simulator, training pipeline and command-line front end
//! for the `hug-core` engine.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod kv;
pub mod model;
pub mod recording;
pub mod sim;
pub mod pipeline;
pub mod report;
pub mod cli;
