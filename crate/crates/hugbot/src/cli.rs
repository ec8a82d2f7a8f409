//! The `hugbot` command line.
//!
//! Exit codes: 0 on success, 1 for user errors (bad arguments, unreadable
//! or invalid inputs), 2 for internal errors. Errors are reported as a
//! single `error: ...` line on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hug_core::behave::{PolicyRow, RatingMatrix, ResponsePolicy};
use hug_core::featurize::{extract, feature_name, segment, SchemaId, FEATURE_COUNT};
use hug_core::height::{estimate_height, shoulder_angles, HeightObservation};
use hug_core::rng::unit_f64;
use hug_core::{GestureClass, EngineParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::kv;
use crate::model;
use crate::pipeline::{self, PipelineError};
use crate::recording::{self, write_recording, StoredRecording};
use crate::report;
use crate::sim::{self, SignalModel, SimSetup, UserScript};

/// Seed used when `--seed` is not given and nothing else provides one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "hugbot", version, about = "Gesture perception and response tools for a hugging robot")]
pub struct Cli {
    /// Configuration file (engine, height, session, forest and policy settings).
    #[arg(long, global = true, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Master seed; overrides seeds from the configuration or script.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Feature schema models must have been built with.
    #[arg(long, global = true, value_name = "ID", default_value = "hugfeat-v1", value_parser = parse_schema)]
    pub schema: SchemaId,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_schema(s: &str) -> Result<SchemaId, String> {
    s.parse().map_err(|_| format!("`{s}` is not a feature schema id like hugfeat-v1"))
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Generate(GenerateArgs),
    /// Train a gesture classifier on a corpus.
    Train(TrainArgs),
    /// Replay a corpus through the streaming detector and score it.
    Eval(EvalArgs),
    /// Print response probability tables.
    Decide(DecideArgs),
    /// Run a closed-loop hug session against a scripted virtual user.
    Simulate(SimulateArgs),
    /// Estimate user height and shoulder-lift angles.
    Height(HeightArgs),
    /// Write the windowed feature table of a corpus as CSV.
    Features(FeaturesArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub users: usize,
    #[arg(long, default_value_t = 16)]
    pub hugs: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Where to write the model.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Where to write the JSON training report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Also report validation accuracy over the window/overlap/threshold grid.
    #[arg(long)]
    pub sweep: bool,
    /// Train on 80% of the recordings of ten random participants plus `--extra`.
    #[arg(long)]
    pub retrain_protocol: bool,
    /// Extra recordings added by the retraining protocol.
    #[arg(long, value_name = "DIR", requires = "retrain_protocol")]
    pub extra: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Participants scoring below this accuracy are flagged.
    #[arg(long, default_value_t = 0.5)]
    pub flag_below: f64,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Write every replayed detection as CSV.
    #[arg(long, value_name = "FILE")]
    pub detections: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct DecideSource {
    /// Print the published tables.
    #[arg(long)]
    pub default: bool,
    /// Ratings file with `hold`, `rub`, `pat` and `squeeze` rows of four ratings.
    #[arg(long, value_name = "FILE")]
    pub ratings: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecideArgs {
    #[command(flatten)]
    pub source: DecideSource,
    /// Also sample this many responses per row and print the frequencies.
    #[arg(long, value_name = "N")]
    pub draws: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    pub script: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Session event log, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Also store the simulated recording in this corpus directory.
    #[arg(long, value_name = "DIR")]
    pub recording: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HeightArgs {
    /// Distance to the user, meters.
    #[arg(long, allow_negative_numbers = true)]
    pub distance: f64,
    /// Bounding-box height, pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub bbox: f64,
    /// Calibration file (`height.*` keys); defaults to `--params`.
    #[arg(long, value_name = "FILE")]
    pub calib: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Internal(m) => m,
        }
    }
}

fn user(e: impl ToString) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl ToString) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Forest(_) | PipelineError::Detect { .. } => internal(e),
            _ => user(e),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| user(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| user(format!("cannot read {}: {e}", path.display())))
}

/// Parse arguments and run, writing normal output to `out`. Returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let rendered = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&rendered).trim_start_matches("error: ");
            let _ = writeln!(err, "error: {first}");
            return 1;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let c = match &cli.params {
        Some(p) => Config::load(p).map_err(user)?,
        None => Config::default(),
    };
    c.validate().map_err(user)?;
    Ok(c)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let o = &mut *out;
    match &cli.command {
        Command::Generate(a) => generate(cli, &config, a, o),
        Command::Train(a) => train(cli, &config, a, o),
        Command::Eval(a) => eval(cli, &config, a, o),
        Command::Decide(a) => decide(cli, &config, a, o),
        Command::Simulate(a) => simulate(cli, &config, a, o),
        Command::Height(a) => height(&config, a, o),
        Command::Features(a) => features(&config, a, o),
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(internal)?
    };
}

fn generate(cli: &Cli, config: &Config, a: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.users == 0 || a.hugs == 0 {
        return Err(user("--users and --hugs must be at least 1"));
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let signal = SignalModel { sample_rate: config.engine.sample_rate, ..SignalModel::default() };
    let corpus = sim::generate_corpus(a.users, a.hugs, &signal, seed);
    recording::write_corpus(&a.out, &corpus).map_err(user)?;
    say!(out, "wrote {} recordings to {}", corpus.len(), a.out.display());
    Ok(())
}

fn read_corpus(dir: &Path, config: &Config) -> Result<Vec<StoredRecording>, CliError> {
    recording::read_corpus(dir, config.engine.sample_rate).map_err(user)
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

#[derive(Serialize)]
struct TrainReport<'a> {
    seed: u64,
    recordings: usize,
    engine: &'a EngineParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<&'a pipeline::TrainOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protocol: Option<&'a pipeline::ProtocolOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<&'a [pipeline::SweepCell]>,
}

fn train(cli: &Cli, config: &Config, a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus, config)?;
    let mut forest = config.forest.clone();
    if let Some(s) = cli.seed {
        forest.seed = s;
    }
    let engine = &config.engine;
    let (mut outcome, mut protocol) = (None, None);
    let model = if a.retrain_protocol {
        let extra = match &a.extra {
            Some(d) => read_corpus(d, config)?,
            None => Vec::new(),
        };
        let p = pipeline::retrain_protocol(&corpus, &extra, engine, &forest)?;
        say!(out, "participants: {}", p.selection.participants.join(" "));
        say!(
            out,
            "training recordings: {} selected + {} extra",
            p.selection.train.len(),
            p.selection.extra.len()
        );
        say!(out, "held-out accuracy: {} ({} windows)", percent(p.held_out.accuracy), p.held_out.windows);
        let m = p.model.clone();
        protocol = Some(p);
        m
    } else {
        let t = pipeline::train_corpus(&corpus, engine, &forest)?;
        say!(
            out,
            "split: {} train / {} validation / {} test recordings",
            t.split.train.len(),
            t.split.validation.len(),
            t.split.test.len()
        );
        say!(out, "validation accuracy: {} ({} windows)", percent(t.validation.accuracy), t.validation.windows);
        say!(out, "test accuracy: {} ({} windows)", percent(t.test.accuracy), t.test.windows);
        let m = t.model.clone();
        outcome = Some(t);
        m
    };
    model::save(&model, &a.out).map_err(user)?;
    say!(out, "model written to {}", a.out.display());

    let grid = if a.sweep {
        let cells = pipeline::sweep(&corpus, engine, &forest)?;
        say!(out, "sweep (validation accuracy):");
        say!(out, "  W    O    T     accuracy");
        for c in &cells {
            say!(
                out,
                "  {:<4} {:<4} {:<5} {}",
                c.window_w,
                c.overlap_o,
                c.label_threshold_t,
                percent(c.validation_accuracy)
            );
        }
        Some(cells)
    } else {
        None
    };
    if let Some(path) = &a.report {
        let r = TrainReport {
            seed: forest.seed,
            recordings: corpus.len(),
            engine,
            outcome: outcome.as_ref(),
            protocol: protocol.as_ref(),
            sweep: grid.as_deref(),
        };
        write_file(path, &report::to_json("train", &r))?;
    }
    Ok(())
}

fn load_model(cli: &Cli, path: &Path) -> Result<hug_core::forest::ForestModel, CliError> {
    model::load(path, cli.schema).map_err(user)
}

fn eval(cli: &Cli, config: &Config, a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(cli, &a.model)?;
    let corpus = read_corpus(&a.corpus, config)?;
    let ev = pipeline::stream_evaluate(&model, &corpus, &config.engine, a.flag_below)?;
    say!(out, "detections: {}", ev.overall.windows);
    say!(out, "accuracy: {}", percent(ev.overall.accuracy));
    say!(out, "confusion (rows: truth, columns: predicted):");
    say!(out, "  {:<8} {:>7} {:>7} {:>7} {:>7}", "", "hold", "rub", "pat", "squeeze");
    for g in GestureClass::ALL {
        let row = ev.overall.confusion.counts[g.index()];
        say!(out, "  {:<8} {:>7} {:>7} {:>7} {:>7}", g.name(), row[0], row[1], row[2], row[3]);
    }
    say!(out, "per participant:");
    for (p, s) in &ev.participants {
        let flag = if s.flagged { "  FLAGGED" } else { "" };
        say!(out, "  {p}: {} of {} detections{flag}", percent(s.accuracy), s.detections);
    }
    if let Some(path) = &a.detections {
        write_file(path, &pipeline::rows_to_csv(&ev.rows).map_err(internal)?)?;
    }
    if let Some(path) = &a.report {
        write_file(path, &report::to_json("eval", &ev))?;
    }
    Ok(())
}

/// A ratings file: `hold`, `rub`, `pat` and `squeeze` rows, four ratings each.
pub fn parse_ratings(text: &str) -> Result<RatingMatrix, kv::KvError> {
    let entries = kv::parse(text)?;
    kv::no_duplicates(&entries)?;
    let mut rows: [Option<[f64; 4]>; 4] = [None; 4];
    for e in &entries {
        let g: GestureClass = e.key.parse().map_err(|_| e.unknown())?;
        let v = e.numbers()?;
        let row: [f64; 4] = v.try_into().map_err(|_| e.bad("four comma-separated ratings"))?;
        rows[g.index()] = Some(row);
    }
    let mut m = RatingMatrix { rows: [[0.0; 4]; 4] };
    for g in GestureClass::ALL {
        m.rows[g.index()] = rows[g.index()].ok_or_else(|| kv::KvError::Missing(g.name().into()))?;
    }
    Ok(m)
}

fn print_table(out: &mut dyn Write, title: &str, rows: &[[f64; 4]; 4], decimals: usize) -> Result<(), CliError> {
    say!(out, "{title}");
    say!(out, "{:<8} {:>7} {:>7} {:>7} {:>7}", "action", "hold", "rub", "pat", "squeeze");
    for g in GestureClass::ALL {
        let r = rows[g.index()];
        say!(
            out,
            "{:<8} {:>7.d$} {:>7.d$} {:>7.d$} {:>7.d$}",
            g.name(),
            r[0],
            r[1],
            r[2],
            r[3],
            d = decimals
        );
    }
    Ok(())
}

fn decide(cli: &Cli, config: &Config, a: &DecideArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (eta, m) = (config.engine.eta, config.engine.m_exponent);
    let (policy, decimals) = match &a.source.ratings {
        Some(path) => {
            let ratings = parse_ratings(&read_file(path)?).map_err(|e| user(format!("{}: {e}", path.display())))?;
            let p = ResponsePolicy::from_ratings(ratings, eta, m, config.fallback).map_err(user)?;
            (p, 3)
        }
        None => {
            let mut c = config.clone();
            c.ratings = None;
            (c.policy().map_err(user)?, 2)
        }
    };
    let mut shown = policy.probabilities;
    for g in GestureClass::ALL {
        if let PolicyRow::Degenerate = policy.row(g) {
            match policy.fallback {
                Some(f) => {
                    say!(
                        out,
                        "notice: every response to {g} is rated at or below neutral ({eta}); falling back to {f}"
                    );
                    shown[g.index()] = [0.0; 4];
                    shown[g.index()][f.index()] = 1.0;
                }
                None => say!(out, "notice: every response to {g} is rated at or below neutral ({eta}); no fallback"),
            }
        }
    }
    print_table(out, "response probabilities (rows: user action, columns: robot response)", &shown, decimals)?;

    if let Some(n) = a.draws {
        if n == 0 {
            return Err(user("--draws must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(DEFAULT_SEED));
        let mut freq = [[0.0; 4]; 4];
        for g in GestureClass::ALL {
            let mut counts = [0usize; 4];
            for _ in 0..n {
                let u = unit_f64(&mut rng);
                match policy.choose_with(g, Default::default(), u) {
                    Ok(r) => counts[r.index()] += 1,
                    Err(_) => break,
                }
            }
            for k in 0..4 {
                freq[g.index()][k] = counts[k] as f64 / n as f64;
            }
        }
        say!(out, "");
        print_table(out, &format!("sampled frequencies ({n} draws per row)"), &freq, 3)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    script: &'a Path,
    summary: &'a sim::SessionSummary,
}

fn simulate(cli: &Cli, config: &Config, a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut script = UserScript::parse(&read_file(&a.script)?).map_err(|e| user(format!("{}: {e}", a.script.display())))?;
    if let Some(s) = cli.seed {
        script.seed = s;
    }
    let model = load_model(cli, &a.model)?;
    let setup = SimSetup {
        params: config.engine,
        session: config.session.clone(),
        calib: config.height,
        signal: SignalModel { sample_rate: config.engine.sample_rate, ..SignalModel::default() },
        policy: config.policy().map_err(user)?,
        classifier: &model,
    };
    let outcome = sim::run_session(&script, &setup).map_err(|e| match e {
        sim::SimError::Detect(_) => internal(e),
        _ => user(e),
    })?;
    let s = &outcome.summary;
    say!(out, "height estimate: {:.3} m", s.height_estimate);
    say!(out, "hug started at {:.3} s, session ended at {:.3} s in state {:?}", s.hug_start, s.end_time, s.final_state);
    let fmt_counts = |m: &std::collections::BTreeMap<&str, usize>| {
        GestureClass::ALL.iter().map(|g| format!("{}={}", g.name(), m[g.name()])).collect::<Vec<_>>().join(" ")
    };
    say!(out, "detections: {}", fmt_counts(&s.counts.detections));
    say!(out, "responses: {}", fmt_counts(&s.counts.responses));
    say!(out, "layered responses: {}", s.counts.layered_responses);
    say!(out, "proactive gestures: {}", s.counts.proactive_fires);
    say!(out, "squeeze state entries: {}", s.counts.squeeze_state_entries);
    let cause = match s.counts.release_cause {
        Some(hug_core::hugfsm::ReleaseCause::Pressure) => "pressure".to_string(),
        Some(hug_core::hugfsm::ReleaseCause::Torque { joint, torque }) => format!("torque ({joint}, {torque:.1} Nm)"),
        None => "none".to_string(),
    };
    say!(out, "release cause: {cause}");
    if let Some(path) = &a.log {
        write_file(path, &sim::log_to_jsonl(&outcome.log))?;
    }
    if let Some(path) = &a.report {
        write_file(path, &report::to_json("simulate", &SimulateReport { script: &a.script, summary: s }))?;
    }
    if let Some(dir) = &a.recording {
        let id = format!("sim_seed{}", script.seed);
        let stored = StoredRecording { id: id.clone(), hug_id: id, recording: outcome.recording };
        write_recording(dir, &stored).map_err(user)?;
    }
    Ok(())
}

fn height(config: &Config, a: &HeightArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let calib = match &a.calib {
        Some(p) => {
            let c = Config::load(p).map_err(user)?;
            c.validate().map_err(user)?;
            c.height
        }
        None => config.height,
    };
    let obs = HeightObservation { distance_d: a.distance, bbox_height_b: a.bbox };
    let h = estimate_height(&obs, &calib).map_err(user)?;
    let angles = shoulder_angles(h, &calib);
    say!(out, "height: {h:.4} m");
    say!(out, "shoulder lift: left {:.2} deg, right {:.2} deg", angles.left, angles.right);
    if angles.clamped {
        say!(
            out,
            "note: height outside {:.2}..{:.2} m, arm angles clamped to the nearest model user",
            calib.h_min,
            calib.h_max
        );
    }
    Ok(())
}

fn features(config: &Config, a: &FeaturesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus, config)?;
    let mut w = csv::Writer::from_path(&a.out).map_err(user)?;
    let mut header = vec!["recording".to_string(), "participant".into(), "start_index".into(), "label".into()];
    header.extend((0..FEATURE_COUNT).map(|i| {
        let (stream, stat) = feature_name(i).expect("index below FEATURE_COUNT");
        format!("{stream}.{stat}")
    }));
    w.write_record(&header).map_err(user)?;
    let mut n = 0;
    for r in &corpus {
        let windows = segment(&r.recording, &config.engine).map_err(|e| user(format!("recording {}: {e}", r.id)))?;
        for win in &windows {
            let x = extract(win);
            let mut row = vec![
                r.id.clone(),
                r.recording.participant_id.clone(),
                win.start_index.to_string(),
                win.label.unwrap_or(GestureClass::Hold).name().to_string(),
            ];
            row.extend(x.values.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(user)?;
            n += 1;
        }
    }
    w.flush().map_err(user)?;
    say!(out, "wrote {n} windows to {}", a.out.display());
    Ok(())
}
