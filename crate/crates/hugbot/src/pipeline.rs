//! Training, sweeps and streaming evaluation over recording corpora.

use std::collections::{BTreeMap, BTreeSet};

use hug_core::detect::{DetectError, Detector};
use hug_core::featurize::{extract, segment, window_label, FeaturizeError, SchemaId};
use hug_core::forest::{evaluate, train, ConfusionMatrix, Dataset, ForestError, ForestModel, ForestParams};
use hug_core::rng::{derive_seed, index_below};
use hug_core::{EngineParams, GestureClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::recording::StoredRecording;

/// Fewest labeled recordings `train_corpus` accepts.
pub const MIN_RECORDINGS: usize = 4;

/// Seed streams, so the split, the forest and the protocol draws never share numbers.
const SPLIT_STREAM: u64 = 1;
const PROTOCOL_STREAM: u64 = 2;

pub const SWEEP_WIDTHS: [usize; 3] = [50, 75, 100];
pub const SWEEP_OVERLAPS: [usize; 3] = [37, 25, 12];
pub const SWEEP_THRESHOLDS: [f64; 3] = [0.75, 0.5, 0.25];

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("need at least {MIN_RECORDINGS} recordings, got {0}")]
    TooFew(usize),
    #[error("recording {id}: {source}")]
    Featurize { id: String, source: FeaturizeError },
    #[error("recording {id}: {source}")]
    Detect { id: String, source: DetectError },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("{0}")]
    Protocol(String),
}

/// Shuffle `n` items with `rng` and return the permutation.
fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        v.swap(i, index_below(rng, i + 1));
    }
    v
}

/// Recording indices of a 70/20/10 train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split `n` recordings by seed. Each part is sorted; sizes are
/// `round(0.7 n)`, `round(0.2 n)` and the rest.
pub fn split_recordings(n: usize, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM));
    let order = shuffled(n, &mut rng);
    let n_train = (n * 7 + 5) / 10;
    let n_val = ((n * 2 + 5) / 10).min(n - n_train);
    let part = |r: std::ops::Range<usize>| {
        let mut v = order[r].to_vec();
        v.sort_unstable();
        v
    };
    Split { train: part(0..n_train), validation: part(n_train..n_train + n_val), test: part(n_train + n_val..n) }
}

/// Labeled windows of the given recordings.
pub fn windowed_dataset<'a>(
    recordings: impl IntoIterator<Item = &'a StoredRecording>,
    params: &EngineParams,
) -> Result<Dataset, PipelineError> {
    let mut data = Dataset::new(SchemaId::CURRENT);
    for r in recordings {
        let windows =
            segment(&r.recording, params).map_err(|source| PipelineError::Featurize { id: r.id.clone(), source })?;
        for w in &windows {
            data.push(&extract(w), w.label.unwrap_or(GestureClass::Hold))?;
        }
    }
    Ok(data)
}

fn pick<'a>(corpus: &'a [StoredRecording], idx: &'a [usize]) -> impl Iterator<Item = &'a StoredRecording> + 'a {
    idx.iter().map(move |&i| &corpus[i])
}

/// Per-class counts, in class order.
fn class_counts(data: &Dataset) -> BTreeMap<&'static str, usize> {
    let c = data.class_counts();
    GestureClass::ALL.iter().map(|g| (g.name(), c[g.index()])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub windows: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub recall: BTreeMap<&'static str, Option<f64>>,
}

impl Evaluation {
    pub fn of(cm: ConfusionMatrix) -> Self {
        let recall = cm.recall();
        Self {
            windows: cm.total() as usize,
            accuracy: cm.accuracy(),
            confusion: cm,
            recall: GestureClass::ALL.iter().map(|g| (g.name(), recall[g.index()])).collect(),
        }
    }

    /// Class with the highest recall, ties going to the earlier class.
    pub fn best_class(&self) -> Option<GestureClass> {
        let r = self.confusion.recall();
        let mut best: Option<(GestureClass, f64)> = None;
        for g in GestureClass::ALL {
            if let Some(v) = r[g.index()] {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
        }
        best.map(|(g, _)| g)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    #[serde(skip)]
    pub model: ForestModel,
    pub split: Split,
    pub train_windows: BTreeMap<&'static str, usize>,
    pub validation: Evaluation,
    pub test: Evaluation,
}

/// Split, window, train on the training part and score the other two.
pub fn train_corpus(
    corpus: &[StoredRecording],
    engine: &EngineParams,
    forest: &ForestParams,
) -> Result<TrainOutcome, PipelineError> {
    if corpus.len() < MIN_RECORDINGS {
        return Err(PipelineError::TooFew(corpus.len()));
    }
    let split = split_recordings(corpus.len(), forest.seed);
    let train_set = windowed_dataset(pick(corpus, &split.train), engine)?;
    let model = train(&train_set, forest)?;
    let score = |idx: &[usize]| -> Result<Evaluation, PipelineError> {
        let data = windowed_dataset(pick(corpus, idx), engine)?;
        if data.is_empty() {
            return Ok(Evaluation::of(ConfusionMatrix::default()));
        }
        Ok(Evaluation::of(evaluate(&model, &data)?))
    };
    let validation = score(&split.validation)?;
    let test = score(&split.test)?;
    Ok(TrainOutcome { train_windows: class_counts(&train_set), model, split, validation, test })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub window_w: usize,
    pub overlap_o: usize,
    pub label_threshold_t: f64,
    pub train_windows: usize,
    pub validation_accuracy: f64,
}

/// Validation accuracy over the full W x O x T grid, on one fixed split.
pub fn sweep(
    corpus: &[StoredRecording],
    engine: &EngineParams,
    forest: &ForestParams,
) -> Result<Vec<SweepCell>, PipelineError> {
    if corpus.len() < MIN_RECORDINGS {
        return Err(PipelineError::TooFew(corpus.len()));
    }
    let split = split_recordings(corpus.len(), forest.seed);
    let mut out = Vec::new();
    for w in SWEEP_WIDTHS {
        for o in SWEEP_OVERLAPS {
            for t in SWEEP_THRESHOLDS {
                let p = EngineParams { window_w: w, overlap_o: o, label_threshold_t: t, ..*engine };
                let train_set = windowed_dataset(pick(corpus, &split.train), &p)?;
                let model = train(&train_set, forest)?;
                let val = windowed_dataset(pick(corpus, &split.validation), &p)?;
                let accuracy = if val.is_empty() { 0.0 } else { evaluate(&model, &val)?.accuracy() };
                out.push(SweepCell {
                    window_w: w,
                    overlap_o: o,
                    label_threshold_t: t,
                    train_windows: train_set.len(),
                    validation_accuracy: accuracy,
                });
            }
        }
    }
    Ok(out)
}

/// Recordings used by the reduced retraining protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSelection {
    pub participants: Vec<String>,
    /// Ids of the chosen participants' recordings used for training.
    pub train: Vec<String>,
    /// Ids of the chosen participants' remaining recordings.
    pub held_out: Vec<String>,
    pub extra: Vec<String>,
}

pub const PROTOCOL_USERS: usize = 10;
pub const PROTOCOL_FRACTION: (usize, usize) = (8, 10);

/// Pick `PROTOCOL_USERS` participants at random and 80% of their recordings.
pub fn protocol_selection(
    corpus: &[StoredRecording],
    extra: &[StoredRecording],
    seed: u64,
) -> Result<ProtocolSelection, PipelineError> {
    let participants: Vec<&str> = corpus
        .iter()
        .map(|r| r.recording.participant_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if participants.len() < PROTOCOL_USERS {
        return Err(PipelineError::Protocol(format!(
            "retraining protocol needs {PROTOCOL_USERS} participants, corpus has {}",
            participants.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, PROTOCOL_STREAM));
    let order = shuffled(participants.len(), &mut rng);
    let mut chosen: Vec<String> = order[..PROTOCOL_USERS].iter().map(|&i| participants[i].to_string()).collect();
    chosen.sort();

    let pool: Vec<&StoredRecording> = corpus.iter().filter(|r| chosen.contains(&r.recording.participant_id)).collect();
    let (num, den) = PROTOCOL_FRACTION;
    let n_train = (pool.len() * num + den / 2) / den;
    let order = shuffled(pool.len(), &mut rng);
    let mut train: Vec<String> = order[..n_train].iter().map(|&i| pool[i].id.clone()).collect();
    let mut held_out: Vec<String> = order[n_train..].iter().map(|&i| pool[i].id.clone()).collect();
    train.sort();
    held_out.sort();
    Ok(ProtocolSelection { participants: chosen, train, held_out, extra: extra.iter().map(|r| r.id.clone()).collect() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolOutcome {
    #[serde(skip)]
    pub model: ForestModel,
    pub selection: ProtocolSelection,
    pub train_windows: BTreeMap<&'static str, usize>,
    pub held_out: Evaluation,
}

/// Train on the protocol selection plus every extra recording.
pub fn retrain_protocol(
    corpus: &[StoredRecording],
    extra: &[StoredRecording],
    engine: &EngineParams,
    forest: &ForestParams,
) -> Result<ProtocolOutcome, PipelineError> {
    let selection = protocol_selection(corpus, extra, forest.seed)?;
    let by_id = |ids: &[String]| -> Vec<&StoredRecording> {
        corpus.iter().filter(|r| ids.binary_search(&r.id).is_ok()).collect()
    };
    let train_recs: Vec<&StoredRecording> = by_id(&selection.train).into_iter().chain(extra).collect();
    let train_set = windowed_dataset(train_recs, engine)?;
    let model = train(&train_set, forest)?;
    let held = windowed_dataset(by_id(&selection.held_out), engine)?;
    let cm = if held.is_empty() { ConfusionMatrix::default() } else { evaluate(&model, &held)? };
    Ok(ProtocolOutcome { model, selection, train_windows: class_counts(&train_set), held_out: Evaluation::of(cm) })
}

/// One real-time detection replayed from a recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRow {
    pub recording: String,
    pub participant: String,
    pub t: f64,
    /// Index, counted from hug start, of the window's first sample.
    pub window_start: usize,
    pub truth: GestureClass,
    pub predicted: GestureClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantScore {
    pub detections: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamEvaluation {
    pub overall: Evaluation,
    pub participants: BTreeMap<String, ParticipantScore>,
    pub flag_below: f64,
    #[serde(skip)]
    pub rows: Vec<DetectionRow>,
}

/// Replay each recording's hug through the streaming detector. A detection
/// is correct when it matches the annotation label of its window.
pub fn stream_evaluate(
    model: &ForestModel,
    corpus: &[StoredRecording],
    engine: &EngineParams,
    flag_below: f64,
) -> Result<StreamEvaluation, PipelineError> {
    let mut rows = Vec::new();
    let mut detector = Detector::new(model, engine);
    for r in corpus {
        let rec = &r.recording;
        let hug = rec.hug_samples();
        detector.reset();
        detector.hug_started();
        for s in hug {
            let d = detector.push(*s).map_err(|source| PipelineError::Detect { id: r.id.clone(), source })?;
            if let Some(d) = d {
                let window = &hug[d.window_start..d.window_start + engine.window_w];
                rows.push(DetectionRow {
                    recording: r.id.clone(),
                    participant: rec.participant_id.clone(),
                    t: d.t,
                    window_start: d.window_start,
                    truth: window_label(rec, window, engine.label_threshold_t),
                    predicted: d.label,
                });
            }
        }
    }
    Ok(score_rows(rows, flag_below))
}

/// Aggregate a per-detection log into overall and per-participant scores.
pub fn score_rows(rows: Vec<DetectionRow>, flag_below: f64) -> StreamEvaluation {
    let mut cm = ConfusionMatrix::default();
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for row in &rows {
        cm.record(row.truth, row.predicted);
        let e = per.entry(row.participant.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(row.truth == row.predicted);
    }
    let participants = per
        .into_iter()
        .map(|(p, (n, c))| {
            let accuracy = if n == 0 { 0.0 } else { c as f64 / n as f64 };
            (p, ParticipantScore { detections: n, correct: c, accuracy, flagged: accuracy < flag_below })
        })
        .collect();
    StreamEvaluation { overall: Evaluation::of(cm), participants, flag_below, rows }
}

/// The per-detection log as CSV.
pub fn rows_to_csv(rows: &[DetectionRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_disjointness() {
        for n in [4, 10, 37, 512] {
            let s = split_recordings(n, 9);
            assert_eq!(s.train.len(), (n * 7 + 5) / 10);
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(split_recordings(512, 9), split_recordings(512, 9));
        assert_ne!(split_recordings(512, 9), split_recordings(512, 10));
    }

    #[test]
    fn flagging() {
        let row = |p: &str, truth, predicted| DetectionRow {
            recording: p.into(),
            participant: p.into(),
            t: 0.0,
            window_start: 0,
            truth,
            predicted,
        };
        use GestureClass::*;
        let ev = score_rows(vec![row("a", Hold, Hold), row("a", Pat, Pat), row("b", Rub, Pat), row("b", Hold, Hold)], 0.6);
        assert_eq!(ev.participants["a"].accuracy, 1.0);
        assert!(ev.participants["b"].flagged);
        assert_eq!(ev.overall.accuracy, 0.75);
        let csv = rows_to_csv(&ev.rows).unwrap();
        assert!(csv.starts_with("recording,participant,t,window_start,truth,predicted\n"));
    }
}
