//! Weighted MAX-SAT over [`WeightedCnf`] instances.
//!
//! Two exact solvers share one tie-breaking rule: among optimal assignments
//! the lexicographically smallest value vector wins, reading variables in
//! index order (root first) with `false < true`. Satisfied weight is always
//! summed in clause order by [`evaluate`], so both solvers report identical
//! weights for identical assignments.

mod bnb;
mod brute;
pub mod wcnf;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{NodeId, WeightedCnf};

pub use bnb::solve;
pub use brute::{solve_brute, BRUTE_FORCE_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("assignment covers {given} of {expected} variables")]
    UnassignedVariable { given: usize, expected: usize },
    #[error("{0} variables exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooManyVariables(usize),
}

/// A complete truth assignment with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `values[i]` is the value of variable `i`.
    pub values: Vec<bool>,
    pub satisfied_weight: f64,
    /// Indices of unsatisfied clauses, ascending.
    pub violated: Vec<usize>,
}

impl Assignment {
    pub fn from_values(cnf: &WeightedCnf, values: Vec<bool>) -> Result<Self, SolveError> {
        let (satisfied_weight, violated) = evaluate(cnf, &values)?;
        Ok(Assignment {
            values,
            satisfied_weight,
            violated,
        })
    }

    /// Values keyed by node id.
    pub fn by_node(&self, cnf: &WeightedCnf) -> BTreeMap<NodeId, bool> {
        cnf.variables
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

/// Total weight of satisfied clauses (summed in clause order) and the
/// indices of violated ones.
pub fn evaluate(cnf: &WeightedCnf, values: &[bool]) -> Result<(f64, Vec<usize>), SolveError> {
    if values.len() != cnf.num_vars() {
        return Err(SolveError::UnassignedVariable {
            given: values.len(),
            expected: cnf.num_vars(),
        });
    }
    let mut satisfied = 0.0;
    let mut violated = Vec::new();
    for (i, clause) in cnf.clauses.iter().enumerate() {
        if clause.is_satisfied(values) {
            satisfied += clause.weight;
        } else {
            violated.push(i);
        }
    }
    Ok((satisfied, violated))
}

/// Objective values closer than this are treated as tied. Without it, two
/// clause subsets with equal real weight can differ in the last bit after
/// summation (or after rescaling), and the tie-break would flip.
pub(crate) fn tie_tolerance(cnf: &WeightedCnf) -> f64 {
    1e-12 * cnf.total_weight()
}

/// True when `candidate` should replace `best` under the objective and the
/// lexicographic tie-break.
pub(crate) fn improves(candidate: (f64, &[bool]), best: Option<(f64, &[bool])>, tol: f64) -> bool {
    match best {
        None => true,
        Some((best_w, best_v)) => {
            candidate.0 > best_w + tol || (candidate.0 >= best_w - tol && candidate.1 < best_v)
        }
    }
}
