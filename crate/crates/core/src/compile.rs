//! Turning a pruned tree into a weighted MAX-SAT instance.
//!
//! Every tree node becomes one boolean variable (pre-order, root first).
//! Integral leaves contribute unary belief clauses whose weight is the
//! magnitude of `(p - q) / (p + q)`, with `p = P(True | E)` and
//! `q = P(True | ¬E)`; the clause's polarity carries the sign. Edges
//! contribute either implication clauses weighted by how much more likely the
//! child explanation is under its own label than under the opposite one
//! (likelihood mode), or clauses from an NLI verifier over all node pairs
//! (verifier mode).

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{Lm, LmError};
use crate::tree::MaieuticTree;
use crate::types::{
    Answer, ClauseOrigin, Integrity, Literal, NodeId, PromptSet, Proposition, Var, WeightedClause,
    WeightedCnf,
};
use crate::verifier::{relation_clauses, RelationOptions, Verifier, VerifierError};

/// Belief clauses lighter than this carry no information and are dropped.
pub const MIN_BELIEF_WEIGHT: f64 = 1e-12;

/// Largest f64 below 1; consistency weights are kept strictly inside (0, 1).
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("tree holds only the question; nothing to compile")]
    EmptyTree,
    #[error("node {0}: both truth probabilities are zero")]
    DegenerateBelief(NodeId),
    #[error("node {0} has no truth probabilities")]
    MissingProbabilities(NodeId),
    #[error("leaf {0} is not integral; prune the tree first")]
    Unpruned(NodeId),
    #[error("likelihood for edge {parent} -> {child}: {source}")]
    Likelihood {
        parent: NodeId,
        child: NodeId,
        #[source]
        source: LmError,
    },
    #[error("verifier: {0}")]
    Verifier(#[from] VerifierError),
}

impl CompileError {
    /// True when the backend cannot score sequences and verifier mode should
    /// be used instead.
    pub fn is_not_supported(&self) -> bool {
        matches!(
            self,
            CompileError::Likelihood {
                source: LmError::NotSupported(_),
                ..
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileMode {
    #[default]
    Likelihood,
    Verifier,
}

/// Where the binary (edge or pair) clauses come from.
#[derive(Clone, Copy)]
pub enum Relations<'a> {
    Likelihood {
        lm: &'a Lm<'a>,
        prompts: &'a PromptSet,
    },
    Verifier {
        verifier: &'a dyn Verifier,
        options: RelationOptions,
    },
}

impl Relations<'_> {
    pub fn mode(&self) -> CompileMode {
        match self {
            Relations::Likelihood { .. } => CompileMode::Likelihood,
            Relations::Verifier { .. } => CompileMode::Verifier,
        }
    }
}

/// `(p - q) / (p + q)`: positive when the model affirms the statement more
/// readily than its negation.
pub fn belief_weight(true_prob: f64, neg_true_prob: f64) -> Option<f64> {
    let total = true_prob + neg_true_prob;
    (total > 0.0).then(|| ((true_prob - neg_true_prob) / total).clamp(-1.0, 1.0))
}

/// [`belief_weight`] from a node's stored probabilities.
pub fn node_belief(node: &Proposition) -> Result<f64, CompileError> {
    match (node.true_prob, node.neg_true_prob) {
        (Some(p), Some(q)) => {
            belief_weight(p, q).ok_or_else(|| CompileError::DegenerateBelief(node.id.clone()))
        }
        _ => Err(CompileError::MissingProbabilities(node.id.clone())),
    }
}

/// `L_A / (L_A + L_¬A)` from log-likelihoods, i.e. the logistic function of
/// their difference, evaluated without overflow and kept inside (0, 1).
pub fn consistency_weight(logp_label: f64, logp_other: f64) -> f64 {
    let d = logp_label - logp_other;
    let s = if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Variable index per node: pre-order, root first.
pub fn variable_map(tree: &MaieuticTree) -> HashMap<NodeId, Var> {
    tree.nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.clone(), Var(i as u32)))
        .collect()
}

/// One unary clause per non-root leaf, oriented by its integrity.
pub fn compile_belief_clauses(tree: &MaieuticTree) -> Result<Vec<WeightedClause>, CompileError> {
    let vars = variable_map(tree);
    let mut clauses = Vec::new();
    for leaf in tree.leaves().into_iter().filter(|p| !p.is_root()) {
        let var = vars[&leaf.id];
        let literal = match leaf.integrity {
            Integrity::IntegralTrue => Literal::pos(var),
            Integrity::IntegralFalse => Literal::neg(var),
            Integrity::NotIntegral | Integrity::Unchecked => {
                return Err(CompileError::Unpruned(leaf.id.clone()))
            }
        };
        let weight = node_belief(leaf)?.abs();
        if weight < MIN_BELIEF_WEIGHT {
            continue;
        }
        clauses.push(
            WeightedClause::new(vec![literal], weight, ClauseOrigin::Belief)
                .expect("unary clause with positive weight"),
        );
    }
    Ok(clauses)
}

/// Consistency weight of `child` as an explanation of `label` for `parent`.
pub fn edge_consistency(
    lm: &Lm<'_>,
    parent: &Proposition,
    child: &Proposition,
    label: Answer,
    prompts: &PromptSet,
) -> Result<f64, CompileError> {
    let err = |source| CompileError::Likelihood {
        parent: parent.id.clone(),
        child: child.id.clone(),
        source,
    };
    let own = lm
        .sequence_logprob(&child.text, &parent.text, label, prompts)
        .map_err(err)?;
    let other = lm
        .sequence_logprob(&child.text, &parent.text, label.flip(), prompts)
        .map_err(err)?;
    Ok(consistency_weight(own, other))
}

/// One implication per edge: a True-child implies its parent, a False-child
/// implies the parent's negation.
pub fn compile_consistency_clauses(
    tree: &MaieuticTree,
    lm: &Lm<'_>,
    prompts: &PromptSet,
) -> Result<Vec<WeightedClause>, CompileError> {
    let vars = variable_map(tree);
    let edges = tree.edges();
    let weights: Vec<f64> = edges
        .par_iter()
        .map(|e| {
            let parent = tree.node(&e.parent).expect("edge endpoints exist");
            let child = tree.node(&e.child).expect("edge endpoints exist");
            edge_consistency(lm, parent, child, e.label, prompts)
        })
        .collect::<Result<_, _>>()?;
    Ok(edges
        .iter()
        .zip(weights)
        .map(|(e, w)| {
            let (p, c) = (vars[&e.parent], vars[&e.child]);
            let head = match e.label {
                Answer::True => Literal::pos(p),
                Answer::False => Literal::neg(p),
            };
            WeightedClause::new(vec![Literal::neg(c), head], w, ClauseOrigin::Consistency)
                .expect("distinct endpoints and positive weight")
        })
        .collect())
}

/// Belief clauses followed by the relation clauses.
pub fn compile(tree: &MaieuticTree, relations: Relations<'_>) -> Result<WeightedCnf, CompileError> {
    if tree.is_trivial() {
        return Err(CompileError::EmptyTree);
    }
    let mut clauses = compile_belief_clauses(tree)?;
    match relations {
        Relations::Likelihood { lm, prompts } => {
            clauses.extend(compile_consistency_clauses(tree, lm, prompts)?)
        }
        Relations::Verifier { verifier, options } => {
            clauses.extend(relation_clauses(tree, verifier, options)?)
        }
    }
    let variables = tree.nodes().iter().map(|p| p.id.clone()).collect();
    Ok(WeightedCnf::new(variables, clauses).expect("compiled clauses reference tree nodes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpLiteral {
    pub node: NodeId,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpClause {
    pub literals: Vec<DumpLiteral>,
    pub weight: f64,
    pub origin: ClauseOrigin,
    /// Present when dumped against an assignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
}

/// Clauses with node ids in place of variable indices.
pub fn clause_dump(cnf: &WeightedCnf, values: Option<&[bool]>) -> Vec<DumpClause> {
    cnf.clauses
        .iter()
        .map(|c| DumpClause {
            literals: c
                .literals
                .iter()
                .map(|l| DumpLiteral {
                    node: cnf.variables[l.var.index()].clone(),
                    positive: l.positive,
                })
                .collect(),
            weight: c.weight,
            origin: c.origin,
            satisfied: values.map(|v| c.is_satisfied(v)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::FixtureBuilder;
    use crate::tree::fixtures::{mixed_tree, prop};
    use crate::types::{PromptLibrary, TreeConfig};

    #[test]
    fn belief_examples() {
        assert!((belief_weight(0.9, 0.1).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(belief_weight(0.3, 0.3), Some(0.0));
        assert_eq!(belief_weight(0.0, 0.5), Some(-1.0));
        assert_eq!(belief_weight(0.0, 0.0), None);
    }

    #[test]
    fn consistency_examples() {
        assert_eq!(consistency_weight(-3.0, -3.0), 0.5);
        let direct = (-10f64).exp() / ((-10f64).exp() + (-12f64).exp());
        assert!((consistency_weight(-10.0, -12.0) - direct).abs() < 1e-15);
        assert!((consistency_weight(-10.0, -12.0) - 0.8807970779778823).abs() < 1e-12);
        let hi = consistency_weight(0.0, -50.0);
        assert!(hi < 1.0 && hi > 1.0 - 1e-15);
        let lo = consistency_weight(-700.0, 0.0);
        assert!(lo > 0.0 && lo.is_finite());
        assert!(consistency_weight(-1000.0, 0.0) > 0.0);
    }

    #[test]
    fn belief_clauses_follow_integrity() {
        // E_T integral/true (0.9, 0.1); E_FT true; E_FF false (0.2, 0.7).
        let clauses = compile_belief_clauses(&mixed_tree()).unwrap();
        let lits: Vec<Literal> = clauses.iter().map(|c| c.literals[0]).collect();
        assert_eq!(
            lits,
            [
                Literal::pos(Var(1)),
                Literal::pos(Var(3)),
                Literal::neg(Var(4))
            ]
        );
        assert!((clauses[0].weight - 0.8).abs() < 1e-12);
        assert!((clauses[2].weight - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn root_only_tree() {
        let t = MaieuticTree::new(
            prop("root", "Q", "", Integrity::NotIntegral),
            TreeConfig::default(),
        );
        assert!(compile_belief_clauses(&t).unwrap().is_empty());
        let backend = FixtureBuilder::new(PromptLibrary::default()).build("x");
        let lm = Lm::new(&backend);
        let lib = PromptLibrary::default();
        let rel = Relations::Likelihood {
            lm: &lm,
            prompts: &lib.abductive,
        };
        assert!(matches!(compile(&t, rel), Err(CompileError::EmptyTree)));
    }

    #[test]
    fn unpruned_leaf_is_an_error() {
        let mut t = MaieuticTree::new(
            prop("root", "Q", "", Integrity::NotIntegral),
            TreeConfig::default(),
        );
        t.add_child(
            &NodeId::root(),
            Answer::True,
            prop("T.0", "a", "T", Integrity::NotIntegral),
        )
        .unwrap();
        assert!(matches!(
            compile_belief_clauses(&t),
            Err(CompileError::Unpruned(_))
        ));
    }

    #[test]
    fn likelihood_mode_three_nodes() {
        let lib = PromptLibrary::default();
        let mut t = MaieuticTree::new(
            prop("root", "Q", "", Integrity::NotIntegral),
            TreeConfig::default(),
        );
        t.add_child(
            &NodeId::root(),
            Answer::True,
            prop("T.0", "a", "T", Integrity::IntegralTrue),
        )
        .unwrap();
        t.add_child(
            &NodeId::root(),
            Answer::False,
            prop("F.0", "b", "F", Integrity::IntegralFalse),
        )
        .unwrap();
        let backend = FixtureBuilder::new(lib.clone())
            .logprob("a", "Q", Answer::True, -10.0)
            .logprob("a", "Q", Answer::False, -12.0)
            .logprob("b", "Q", Answer::False, -5.0)
            .logprob("b", "Q", Answer::True, -5.0)
            .build("x");
        let lm = Lm::new(&backend);
        let cnf = compile(
            &t,
            Relations::Likelihood {
                lm: &lm,
                prompts: &lib.abductive,
            },
        )
        .unwrap();
        assert_eq!(cnf.variables.len(), 3);
        let origins: Vec<ClauseOrigin> = cnf.clauses.iter().map(|c| c.origin).collect();
        use ClauseOrigin::*;
        assert_eq!(origins, [Belief, Belief, Consistency, Consistency]);
        // a -> Q and b -> ¬Q.
        assert_eq!(
            cnf.clauses[2].literals,
            [Literal::neg(Var(1)), Literal::pos(Var(0))]
        );
        assert_eq!(
            cnf.clauses[3].literals,
            [Literal::neg(Var(2)), Literal::neg(Var(0))]
        );
        assert!((cnf.clauses[2].weight - 0.8807970779778823).abs() < 1e-12);
        assert_eq!(cnf.clauses[3].weight, 0.5);
    }

    #[test]
    fn missing_logprobs_surface_as_not_supported() {
        let err = CompileError::Likelihood {
            parent: NodeId::root(),
            child: NodeId::from("T.0"),
            source: LmError::NotSupported("x".into()),
        };
        assert!(err.is_not_supported());
    }

    #[test]
    fn dump_names_nodes() {
        let cnf = WeightedCnf::new(
            vec![NodeId::root(), NodeId::from("T.0")],
            vec![WeightedClause::new(
                vec![Literal::neg(Var(1)), Literal::pos(Var(0))],
                0.5,
                ClauseOrigin::Consistency,
            )
            .unwrap()],
        )
        .unwrap();
        let dump = clause_dump(&cnf, Some(&[false, true]));
        assert_eq!(dump[0].literals[0].node.as_str(), "T.0");
        assert_eq!(dump[0].satisfied, Some(false));
        let json = serde_json::to_string(&clause_dump(&cnf, None)).unwrap();
        assert!(!json.contains("satisfied"));
    }
}
