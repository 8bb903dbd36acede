//! JSONL datasets: one `{id, question, label, pair_id?, split?}` object per
//! line. `label` is a boolean or one of the strings `"true"`/`"false"`
//! (any case).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id} (line {line}) has no gold label")]
    MissingGold { id: String, line: usize },
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("dataset is empty")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub label: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

fn parse_label(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn parse_line(raw: &str, line: usize) -> Result<DatasetRecord, DatasetError> {
    let err = |message: String| DatasetError::Parse { line, message };
    let value: Value = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| err("expected a JSON object".into()))?;
    let text = |key: &str| -> Result<Option<String>, DatasetError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(other) => Err(err(format!("field {key:?} must be a string, got {other}"))),
        }
    };
    let id = text("id")?.ok_or_else(|| err("missing id".into()))?;
    let question = text("question")?
        .filter(|q| !q.trim().is_empty())
        .ok_or_else(|| err(format!("record {id}: missing question")))?;
    let label = match obj.get("label") {
        None | Some(Value::Null) => return Err(DatasetError::MissingGold { id, line }),
        Some(v) => parse_label(v).ok_or_else(|| err(format!("record {id}: invalid label {v}")))?,
    };
    Ok(DatasetRecord {
        id,
        question,
        label,
        pair_id: text("pair_id")?,
        split: text("split")?,
    })
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(raw, i + 1)?;
        if !ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    for r in &records {
        if let Some(p) = &r.pair_id {
            if !ids.contains(p) {
                log::warn!("record {} names missing counterpart {p}; it will not count toward pairwise accuracy", r.id);
            }
        }
    }
    Ok(records)
}

/// Reads a dataset, optionally keeping only records of one split.
pub fn load_dataset(path: &Path, split: Option<&str>) -> Result<Vec<DatasetRecord>, DatasetError> {
    let records = parse_dataset(&std::fs::read_to_string(path)?)?;
    match split {
        None => Ok(records),
        Some(s) => {
            let kept: Vec<_> = records
                .into_iter()
                .filter(|r| r.split.as_deref() == Some(s))
                .collect();
            if kept.is_empty() {
                Err(DatasetError::Empty)
            } else {
                Ok(kept)
            }
        }
    }
}
