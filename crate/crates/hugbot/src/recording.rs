//! Recording files.
//!
//! A recording `<id>` in a corpus directory is three files:
//!
//! * `<id>.csv`: header `t,pressure,mic`, one sample per row. The `t` column
//!   may be left out, in which case samples are taken to be uniformly spaced
//!   at the nominal sample rate.
//! * `<id>.labels.csv`: header `label,t_start,t_end`, one gesture per row.
//!   Optional; a missing file means no annotations.
//! * `<id>.meta`: `key = value` lines `participant`, `hug_id`, `hug_start`,
//!   `hug_end`. Optional; the participant defaults to the id and a missing
//!   hug span is inferred from the pressure rise.

use std::fs;
use std::path::{Path, PathBuf};

use hug_core::types::{infer_hug_span, validate_recording, Violation};
use hug_core::{GestureClass, GestureInterval, HugRecording, SensorSample};
use serde::{Deserialize, Serialize};

use crate::kv;

/// Pressure rise over the initial reading that marks the hug start when the
/// metadata gives none.
pub const INFER_RISE: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum RecordingError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { path: PathBuf, violations: Vec<Violation> },
}

/// A recording together with its corpus identity.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRecording {
    pub id: String,
    pub hug_id: String,
    pub recording: HugRecording,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    label: GestureClass,
    t_start: f64,
    t_end: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordingError + '_ {
    move |source| RecordingError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RecordingError + '_ {
    move |source| RecordingError::Csv { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> RecordingError {
    RecordingError::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn read_samples(path: &Path, sample_rate: f64) -> Result<Vec<SensorSample>, RecordingError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(p), Some(m)) = (col("pressure"), col("mic")) else {
        return Err(format_err(path, "header must name `pressure` and `mic` columns"));
    };
    let t = col("t");
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let num = |c: usize| -> Result<f64, RecordingError> {
            let field = row.get(c).unwrap_or("");
            field.parse().map_err(|_| format_err(path, format!("row {}: `{field}` is not a number", i + 1)))
        };
        let time = match t {
            Some(c) => num(c)?,
            None => i as f64 / sample_rate,
        };
        out.push(SensorSample::new(time, num(p)?, num(m)?));
    }
    Ok(out)
}

fn read_labels(path: &Path) -> Result<Vec<GestureInterval>, RecordingError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err(path))?;
    rdr.deserialize::<LabelRow>()
        .map(|r| r.map(|r| GestureInterval::new(r.label, r.t_start, r.t_end)).map_err(csv_err(path)))
        .collect()
}

struct Meta {
    participant: Option<String>,
    hug_id: Option<String>,
    hug_start: Option<f64>,
    hug_end: Option<f64>,
}

fn read_meta(path: &Path) -> Result<Meta, RecordingError> {
    let mut meta = Meta { participant: None, hug_id: None, hug_start: None, hug_end: None };
    if !path.exists() {
        return Ok(meta);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |e: kv::KvError| format_err(path, e.to_string());
    let entries = kv::parse(&text).map_err(bad)?;
    kv::no_duplicates(&entries).map_err(bad)?;
    for e in &entries {
        match e.key.as_str() {
            "participant" => meta.participant = Some(e.value.clone()),
            "hug_id" => meta.hug_id = Some(e.value.clone()),
            "hug_start" => meta.hug_start = Some(e.finite().map_err(bad)?),
            "hug_end" => meta.hug_end = Some(e.finite().map_err(bad)?),
            _ => return Err(bad(e.unknown())),
        }
    }
    Ok(meta)
}

/// Load and validate recording `id` from `dir`.
pub fn read_recording(dir: &Path, id: &str, sample_rate: f64) -> Result<StoredRecording, RecordingError> {
    let data = dir.join(format!("{id}.csv"));
    let samples = read_samples(&data, sample_rate)?;
    if samples.is_empty() {
        return Err(format_err(&data, "no samples"));
    }
    let annotations = read_labels(&dir.join(format!("{id}.labels.csv")))?;
    let meta = read_meta(&dir.join(format!("{id}.meta")))?;
    let (first, last) = (samples[0].t, samples[samples.len() - 1].t);
    let inferred = infer_hug_span(&samples, INFER_RISE).unwrap_or((first, last));
    let recording = HugRecording {
        hug_start: meta.hug_start.unwrap_or(inferred.0),
        hug_end: meta.hug_end.unwrap_or(inferred.1),
        participant_id: meta.participant.unwrap_or_else(|| id.to_string()),
        samples,
        annotations,
    };
    let violations = validate_recording(&recording);
    if !violations.is_empty() {
        return Err(RecordingError::Invalid { path: data, violations });
    }
    Ok(StoredRecording { id: id.to_string(), hug_id: meta.hug_id.unwrap_or_else(|| id.to_string()), recording })
}

/// Write the three files of one recording.
pub fn write_recording(dir: &Path, stored: &StoredRecording) -> Result<(), RecordingError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rec = &stored.recording;
    let data = dir.join(format!("{}.csv", stored.id));
    let mut w = csv::Writer::from_path(&data).map_err(csv_err(&data))?;
    for s in &rec.samples {
        w.serialize(s).map_err(csv_err(&data))?;
    }
    w.flush().map_err(io_err(&data))?;

    let labels = dir.join(format!("{}.labels.csv", stored.id));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&labels).map_err(csv_err(&labels))?;
    // Written explicitly so an unannotated recording still gets a header.
    w.write_record(["label", "t_start", "t_end"]).map_err(csv_err(&labels))?;
    for a in &rec.annotations {
        w.serialize(LabelRow { label: a.label, t_start: a.t_start, t_end: a.t_end }).map_err(csv_err(&labels))?;
    }
    w.flush().map_err(io_err(&labels))?;

    let meta = dir.join(format!("{}.meta", stored.id));
    let mut kvw = kv::Writer::default();
    kvw.put("participant", &rec.participant_id);
    kvw.put("hug_id", &stored.hug_id);
    kvw.put("hug_start", rec.hug_start);
    kvw.put("hug_end", rec.hug_end);
    fs::write(&meta, kvw.finish()).map_err(io_err(&meta))
}

/// Ids of the recordings in `dir`, sorted.
pub fn corpus_ids(dir: &Path) -> Result<Vec<String>, RecordingError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(".csv") {
            if !id.ends_with(".labels") {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn read_corpus(dir: &Path, sample_rate: f64) -> Result<Vec<StoredRecording>, RecordingError> {
    let ids = corpus_ids(dir)?;
    if ids.is_empty() {
        return Err(format_err(dir, "no recordings found"));
    }
    ids.iter().map(|id| read_recording(dir, id, sample_rate)).collect()
}

pub fn write_corpus(dir: &Path, corpus: &[StoredRecording]) -> Result<(), RecordingError> {
    corpus.iter().try_for_each(|r| write_recording(dir, r))
}
