//! Model file: one header line `HUGFOREST <version> <schema>` followed by
//! the forest as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use hug_core::featurize::SchemaId;
use hug_core::forest::ForestModel;

pub const MAGIC: &str = "HUGFOREST";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a model file (missing `{MAGIC}` header)")]
    NotAModel,
    #[error("model format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: String },
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error("model was built for feature schema {found}, expected {expected}")]
    SchemaMismatch { expected: SchemaId, found: SchemaId },
}

pub fn to_string(model: &ForestModel) -> String {
    let body = serde_json::to_string(model).expect("forest models always serialize");
    format!("{MAGIC} {FORMAT_VERSION} {}\n{body}\n", model.schema)
}

/// Parse a model and check it was built against `expected` features.
pub fn from_str(text: &str, expected: SchemaId) -> Result<ForestModel, ModelError> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(ModelError::NotAModel);
    }
    let version = parts.next().unwrap_or("");
    if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
        return Err(ModelError::Version { found: version.to_string() });
    }
    let schema: SchemaId = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ModelError::Corrupt("header lacks a feature schema".into()))?;
    if schema != expected {
        return Err(ModelError::SchemaMismatch { expected, found: schema });
    }
    let model: ForestModel = serde_json::from_str(body).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    if model.schema != schema {
        return Err(ModelError::Corrupt("header and body disagree on the feature schema".into()));
    }
    model.check().map_err(|e| ModelError::Corrupt(e.to_string()))?;
    Ok(model)
}

pub fn save(model: &ForestModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, to_string(model)).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load(path: &Path, expected: SchemaId) -> Result<ForestModel, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    from_str(&text, expected)
}
