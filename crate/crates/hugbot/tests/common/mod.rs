#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use hug_core::forest::{ForestModel, ForestParams};
use hug_core::EngineParams;
use hugbot::pipeline::train_corpus;
use hugbot::sim::{generate_corpus, SignalModel};

/// A forest trained once per test binary on a 128-recording corpus.
pub fn small_model() -> &'static ForestModel {
    static MODEL: OnceLock<ForestModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = generate_corpus(16, 8, &SignalModel::default(), 7);
        let forest = ForestParams { n_trees: 40, seed: 7, ..ForestParams::default() };
        train_corpus(&corpus, &EngineParams::default(), &forest).unwrap().model
    })
}

pub struct Run {
    pub code: i32,
    pub out: String,
    pub err: String,
}

pub fn hugbot(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hugbot").chain(args.iter().copied());
    let code = hugbot::cli::main_with(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}
