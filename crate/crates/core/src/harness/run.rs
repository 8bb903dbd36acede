//! Dataset evaluation runs.
//!
//! Records are answered by a bounded worker pool; results, metrics, a
//! manifest and the backend-call trace are written in input order so two
//! runs over the same fixtures produce identical result files.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{TraceRecord, TraceSink};

use super::dataset::DatasetRecord;
use super::metrics::{compute_metrics, Metrics};
use super::{Engine, InferenceResult, Method};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.jsonl";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    Empty,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub gold: bool,
    pub predicted: Option<bool>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<InferenceResult>,
}

/// Reproducibility record written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine_version: String,
    pub method: Method,
    pub config_hash: Option<String>,
    pub tree_config_hash: String,
    pub prompt_hash: String,
    pub backend_id: String,
    pub verifier_id: Option<String>,
    pub seed: Option<u64>,
    pub records: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub outcomes: Vec<RecordOutcome>,
    pub metrics: Metrics,
    pub trace: Vec<TraceRecord>,
    pub manifest: Manifest,
}

impl EvalReport {
    pub fn results_jsonl(&self) -> String {
        self.outcomes
            .iter()
            .map(|o| serde_json::to_string(o).expect("outcome serializes") + "\n")
            .collect()
    }

    /// Writes results, metrics, manifest and trace into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RESULTS_FILE), self.results_jsonl())?;
        std::fs::write(dir.join(METRICS_FILE), pretty(&self.metrics))?;
        std::fs::write(dir.join(MANIFEST_FILE), pretty(&self.manifest))?;
        let mut trace = std::io::BufWriter::new(std::fs::File::create(dir.join(TRACE_FILE))?);
        for r in &self.trace {
            serde_json::to_writer(&mut trace, r)?;
            trace.write_all(b"\n")?;
        }
        trace.flush()
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Run-level facts recorded in the manifest.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

/// Answers every record with `method` using `parallelism` workers.
pub fn evaluate(
    engine: &Engine<'_>,
    records: &[DatasetRecord],
    method: Method,
    parallelism: usize,
    info: &RunInfo,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let answered: Vec<(RecordOutcome, Vec<TraceRecord>)> = pool.install(|| {
        records
            .par_iter()
            .map(|record| {
                let trace = TraceSink::new();
                let outcome = match engine.infer_traced(&record.question, method, &trace) {
                    Ok(result) => RecordOutcome {
                        id: record.id.clone(),
                        gold: record.label,
                        predicted: Some(result.answer),
                        correct: result.answer == record.label,
                        error: None,
                        result: Some(result),
                    },
                    Err(e) => {
                        log::error!("record {}: {e}", record.id);
                        RecordOutcome {
                            id: record.id.clone(),
                            gold: record.label,
                            predicted: None,
                            correct: false,
                            error: Some(e.to_string()),
                            result: None,
                        }
                    }
                };
                (outcome, trace.records())
            })
            .collect()
    });

    let mut outcomes = Vec::with_capacity(answered.len());
    let mut trace = Vec::new();
    for (o, t) in answered {
        outcomes.push(o);
        trace.extend(t);
    }
    let correct: Vec<bool> = outcomes.iter().map(|o| o.correct).collect();
    let mut metrics = compute_metrics(records, &correct).expect("non-empty dataset");
    metrics.errors = outcomes.iter().filter(|o| o.error.is_some()).count();
    metrics.fallbacks = outcomes
        .iter()
        .filter(|o| o.result.as_ref().is_some_and(|r| r.fallback_used))
        .count();

    let s = &engine.settings;
    let manifest = Manifest {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        method,
        config_hash: info.config_hash.clone(),
        tree_config_hash: s.tree.digest(),
        prompt_hash: s.prompts.digest(),
        backend_id: engine.backend_id().to_string(),
        verifier_id: engine.verifier_id().map(String::from),
        seed: info.seed,
        records: records.len(),
    };
    Ok(EvalReport {
        outcomes,
        metrics,
        trace,
        manifest,
    })
}
