//! Depth-first branch and bound.
//!
//! Variables are branched in descending order of incident clause weight. The
//! bound at each node is the total weight minus clauses already falsified
//! minus, for every unassigned variable, the lighter side of the unit clauses
//! that now hinge on it alone (a variable cannot satisfy both polarities).
//! Subtrees are pruned only when their bound falls strictly below the
//! incumbent, so tied optima are still visited and the lexicographic
//! tie-break stays exact.

use crate::types::WeightedCnf;

use super::{evaluate, improves, tie_tolerance, Assignment};

/// Exact optimum. Exponential in the worst case.
pub fn solve(cnf: &WeightedCnf) -> Assignment {
    let mut search = Search::new(cnf);
    search.branch(0);
    let values = search
        .best
        .map(|(_, v)| v)
        .unwrap_or_else(|| vec![false; cnf.num_vars()]);
    Assignment::from_values(cnf, values).expect("search assigns every variable")
}

struct Search<'a> {
    cnf: &'a WeightedCnf,
    /// Per variable: (clause index, literal polarity).
    occurrences: Vec<Vec<(usize, bool)>>,
    order: Vec<usize>,
    values: Vec<Option<bool>>,
    sat_count: Vec<u32>,
    unassigned: Vec<u32>,
    falsified: f64,
    open: usize,
    total: f64,
    slack: f64,
    tol: f64,
    best: Option<(f64, Vec<bool>)>,
    pos_unit: Vec<f64>,
    neg_unit: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(cnf: &'a WeightedCnf) -> Self {
        let n = cnf.num_vars();
        let mut occurrences = vec![Vec::new(); n];
        let mut incident = vec![0.0; n];
        for (ci, c) in cnf.clauses.iter().enumerate() {
            for l in &c.literals {
                occurrences[l.var.index()].push((ci, l.positive));
                incident[l.var.index()] += c.weight;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| incident[b].total_cmp(&incident[a]).then(a.cmp(&b)));
        let total = cnf.total_weight();
        Search {
            cnf,
            occurrences,
            order,
            values: vec![None; n],
            sat_count: vec![0; cnf.clauses.len()],
            unassigned: cnf
                .clauses
                .iter()
                .map(|c| c.literals.len() as u32)
                .collect(),
            falsified: 0.0,
            open: cnf.clauses.len(),
            total,
            slack: 1e-9 * (1.0 + total),
            tol: tie_tolerance(cnf),
            best: None,
            pos_unit: vec![0.0; n],
            neg_unit: vec![0.0; n],
        }
    }

    fn branch(&mut self, depth: usize) {
        if self.open == 0 || depth == self.order.len() {
            self.offer();
            return;
        }
        if let Some(best) = self.best.as_ref().map(|(w, _)| *w) {
            if self.upper_bound() < best - self.slack {
                return;
            }
        }
        let var = self.order[depth];
        let (pos_open, neg_open) = self.open_weight(var);
        if pos_open == 0.0 && neg_open == 0.0 {
            // No undecided clause mentions `var`; false is the canonical value.
            self.assign(var, false);
            self.branch(depth + 1);
            self.unassign(var);
            return;
        }
        let first = pos_open > neg_open;
        for value in [first, !first] {
            let saved = self.falsified;
            self.assign(var, value);
            self.branch(depth + 1);
            self.unassign(var);
            self.falsified = saved;
        }
    }

    /// Completes the partial assignment with `false` and keeps it if better.
    fn offer(&mut self) {
        let candidate: Vec<bool> = self.values.iter().map(|v| v.unwrap_or(false)).collect();
        let (weight, _) = evaluate(self.cnf, &candidate).expect("complete assignment");
        let best = self.best.as_ref().map(|(w, v)| (*w, v.as_slice()));
        if improves((weight, &candidate), best, self.tol) {
            self.best = Some((weight, candidate));
        }
    }

    fn open_weight(&self, var: usize) -> (f64, f64) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &(ci, positive) in &self.occurrences[var] {
            if self.sat_count[ci] == 0 {
                let w = self.cnf.clauses[ci].weight;
                if positive {
                    pos += w;
                } else {
                    neg += w;
                }
            }
        }
        (pos, neg)
    }

    fn upper_bound(&mut self) -> f64 {
        self.pos_unit.iter_mut().for_each(|w| *w = 0.0);
        self.neg_unit.iter_mut().for_each(|w| *w = 0.0);
        for (ci, c) in self.cnf.clauses.iter().enumerate() {
            if self.sat_count[ci] != 0 || self.unassigned[ci] != 1 {
                continue;
            }
            let lit = c
                .literals
                .iter()
                .find(|l| self.values[l.var.index()].is_none())
                .expect("unit clause has one free literal");
            if lit.positive {
                self.pos_unit[lit.var.index()] += c.weight;
            } else {
                self.neg_unit[lit.var.index()] += c.weight;
            }
        }
        let conflict: f64 = self
            .pos_unit
            .iter()
            .zip(&self.neg_unit)
            .map(|(p, n)| p.min(*n))
            .sum();
        self.total - self.falsified - conflict
    }

    fn assign(&mut self, var: usize, value: bool) {
        self.values[var] = Some(value);
        for &(ci, positive) in &self.occurrences[var] {
            self.unassigned[ci] -= 1;
            if positive == value {
                self.sat_count[ci] += 1;
                if self.sat_count[ci] == 1 {
                    self.open -= 1;
                }
            } else if self.sat_count[ci] == 0 && self.unassigned[ci] == 0 {
                self.falsified += self.cnf.clauses[ci].weight;
                self.open -= 1;
            }
        }
    }

    /// Reverses `assign`; the caller restores `falsified`.
    fn unassign(&mut self, var: usize) {
        let value = self.values[var].take().expect("variable was assigned");
        for &(ci, positive) in &self.occurrences[var] {
            if positive == value {
                if self.sat_count[ci] == 1 {
                    self.open += 1;
                }
                self.sat_count[ci] -= 1;
            } else if self.sat_count[ci] == 0 && self.unassigned[ci] == 0 {
                self.open += 1;
            }
            self.unassigned[ci] += 1;
        }
    }
}
