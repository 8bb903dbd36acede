use crate::types::WeightedCnf;

use super::{tie_tolerance, Assignment, SolveError};

pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Exhaustive enumeration of all `2^n` assignments.
///
/// Assignments are visited in lexicographic order (variable 0 most
/// significant), so keeping the first strict maximum yields the canonical
/// optimum.
pub fn solve_brute(cnf: &WeightedCnf) -> Result<Assignment, SolveError> {
    let n = cnf.num_vars();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SolveError::TooManyVariables(n));
    }
    let bit = |var: usize| 1u32 << (n - 1 - var);
    let masks: Vec<(u32, u32, f64)> = cnf
        .clauses
        .iter()
        .map(|c| {
            let mut pos = 0;
            let mut neg = 0;
            for l in &c.literals {
                if l.positive {
                    pos |= bit(l.var.index());
                } else {
                    neg |= bit(l.var.index());
                }
            }
            (pos, neg, c.weight)
        })
        .collect();
    let full = if n == 0 { 0 } else { u32::MAX >> (32 - n) };

    let tol = tie_tolerance(cnf);
    let mut best: Option<(f64, u32)> = None;
    for code in 0..=full {
        let mut weight = 0.0;
        for &(pos, neg, w) in &masks {
            if code & pos != 0 || !code & full & neg != 0 {
                weight += w;
            }
        }
        // Codes increase lexicographically, so only a strict gain replaces.
        if best.is_none_or(|(bw, _)| weight > bw + tol) {
            best = Some((weight, code));
        }
    }
    let code = best.map(|(_, c)| c).unwrap_or(0);
    let values: Vec<bool> = (0..n).map(|v| code & bit(v) != 0).collect();
    Assignment::from_values(cnf, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ClauseOrigin, Literal, NodeId, Var, WeightedClause};

    fn cnf(n: usize, clauses: Vec<(Vec<(u32, bool)>, f64)>) -> WeightedCnf {
        WeightedCnf::new(
            (0..n)
                .map(|i| NodeId::from(format!("v{i}").as_str()))
                .collect(),
            clauses
                .into_iter()
                .map(|(lits, w)| {
                    WeightedClause::new(
                        lits.into_iter()
                            .map(|(v, p)| Literal {
                                var: Var(v),
                                positive: p,
                            })
                            .collect(),
                        w,
                        ClauseOrigin::Nli,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn heavier_unit_wins() {
        let a = solve_brute(&cnf(
            1,
            vec![(vec![(0, true)], 1.0), (vec![(0, false)], 0.4)],
        ))
        .unwrap();
        assert_eq!(a.values, [true]);
        assert_eq!(a.satisfied_weight, 1.0);
        assert_eq!(a.violated, [1]);
    }

    #[test]
    fn tie_prefers_false() {
        let a = solve_brute(&cnf(
            1,
            vec![(vec![(0, true)], 0.5), (vec![(0, false)], 0.5)],
        ))
        .unwrap();
        assert_eq!(a.values, [false]);
    }

    #[test]
    fn unconstrained_variables_default_false() {
        let a = solve_brute(&cnf(3, vec![(vec![(1, true)], 0.5)])).unwrap();
        assert_eq!(a.values, [false, true, false]);
    }

    #[test]
    fn zero_variables() {
        let a = solve_brute(&cnf(0, vec![])).unwrap();
        assert!(a.values.is_empty());
        assert_eq!(a.satisfied_weight, 0.0);
    }

    #[test]
    fn too_many_variables() {
        let big = cnf(25, vec![]);
        assert_eq!(solve_brute(&big), Err(SolveError::TooManyVariables(25)));
    }
}
