//! Per-call audit records.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::Purpose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub digest: String,
    pub purpose: Purpose,
    pub latency_us: u64,
    pub cached: bool,
    pub ok: bool,
}

/// Shared, append-only list of trace records.
#[derive(Debug, Clone, Default)]
pub struct TraceSink {
    records: Arc<Mutex<Vec<TraceRecord>>>,
}

impl TraceSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, record: TraceRecord) {
        self.records.lock().expect("trace lock").push(record);
    }

    pub fn extend(&self, records: impl IntoIterator<Item = TraceRecord>) {
        self.records.lock().expect("trace lock").extend(records);
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.records.lock().expect("trace lock").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("trace lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls that reached a model rather than a cache.
    pub fn uncached_calls(&self) -> usize {
        self.records
            .lock()
            .expect("trace lock")
            .iter()
            .filter(|r| !r.cached)
            .count()
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in self.records() {
            serde_json::to_writer(&mut file, &r)?;
            file.write_all(b"\n")?;
        }
        file.flush()
    }
}
