//! Accuracy and pairwise accuracy.
//!
//! A pair is two records that name each other through `pair_id`; it counts
//! as correct only when both members are answered correctly. Records whose
//! counterpart is missing, or whose counterpart points elsewhere, are left
//! out of the pairwise figure (and counted in `unpaired`).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub pairs: usize,
    pub pairs_correct: usize,
    /// `None` when the dataset holds no complete pair.
    pub pairwise_accuracy: Option<f64>,
    pub unpaired: usize,
    /// Records whose inference failed; they count as incorrect.
    pub errors: usize,
    /// Answers produced by a fallback path.
    pub fallbacks: usize,
}

/// `correct[i]` says whether `records[i]` was answered correctly.
/// Returns `None` for an empty dataset.
pub fn compute_metrics(records: &[DatasetRecord], correct: &[bool]) -> Option<Metrics> {
    assert_eq!(records.len(), correct.len(), "one outcome per record");
    if records.is_empty() {
        return None;
    }
    let n_correct = correct.iter().filter(|&&c| c).count();
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();

    let mut pairs = 0;
    let mut pairs_correct = 0;
    let mut unpaired = 0;
    for (i, r) in records.iter().enumerate() {
        let Some(pid) = &r.pair_id else { continue };
        let mate = index
            .get(pid.as_str())
            .copied()
            .filter(|&j| j != i && records[j].pair_id.as_deref() == Some(r.id.as_str()));
        match mate {
            // Count each mutual pair once, from its earlier member.
            Some(j) if i < j => {
                pairs += 1;
                if correct[i] && correct[j] {
                    pairs_correct += 1;
                }
            }
            Some(_) => {}
            None => unpaired += 1,
        }
    }
    if unpaired > 0 {
        log::warn!("{unpaired} records have an incomplete pair");
    }
    Some(Metrics {
        total: records.len(),
        correct: n_correct,
        accuracy: n_correct as f64 / records.len() as f64,
        pairs,
        pairs_correct,
        pairwise_accuracy: (pairs > 0).then(|| pairs_correct as f64 / pairs as f64),
        unpaired,
        errors: 0,
        fallbacks: 0,
    })
}
