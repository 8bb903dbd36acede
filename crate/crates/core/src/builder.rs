//! Growing and pruning the explanation tree.
//!
//! Starting from the question, every node that still needs support is asked
//! for explanations of both answers ("Q? True, because …" and "Q? False,
//! because …"). Each explanation is checked for integrity right away: the
//! model must give opposite answers to the explanation and its negation.
//! Integral explanations are kept as they are; non-integral ones are expanded
//! one level deeper, until the depth limit. Finally, [`prune`] strips the
//! non-integral leaves so every remaining leaf carries a confident belief.

use std::collections::HashSet;

use log::debug;
use rayon::prelude::*;
use thiserror::Error;

use crate::lm::{Lm, LmError};
use crate::tree::MaieuticTree;
use crate::types::{
    Answer, Integrity, InvalidValue, NodeId, PathLabel, PromptLibrary, PromptSet, Proposition,
    TreeConfig,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid tree config: {0}")]
    Config(#[from] InvalidValue),
    #[error("{stage} for node {node}: {source}")]
    Backend {
        stage: &'static str,
        node: NodeId,
        #[source]
        source: LmError,
    },
}

impl BuildError {
    /// The underlying backend error, if any.
    pub fn lm_error(&self) -> Option<&LmError> {
        match self {
            BuildError::Backend { source, .. } => Some(source),
            BuildError::Config(_) => None,
        }
    }
}

/// Outcome of asking the model about a statement and its negation.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrityCheck {
    pub integrity: Integrity,
    pub negated_text: String,
    /// P(True | E).
    pub true_prob: f64,
    /// P(True | ¬E).
    pub neg_true_prob: f64,
    /// One of the two queries came back at exactly 0.5; such nodes count as
    /// not integral.
    pub tie: bool,
}

impl IntegrityCheck {
    /// Belief `(p - q) / (p + q)`, undefined when both probabilities are 0.
    pub fn belief(&self) -> Option<f64> {
        let total = self.true_prob + self.neg_true_prob;
        (total > 0.0).then(|| (self.true_prob - self.neg_true_prob) / total)
    }

    /// Copies the check's results onto `prop`.
    pub fn apply(&self, prop: &mut Proposition) {
        prop.integrity = self.integrity;
        prop.negated_text = self.negated_text.clone();
        prop.true_prob = Some(self.true_prob);
        prop.neg_true_prob = Some(self.neg_true_prob);
        prop.belief = self.belief();
    }
}

/// Compares the model's answers for `statement` and `negated`.
pub fn check_integrity(
    lm: &Lm<'_>,
    statement: &str,
    negated: &str,
    prompts: &PromptSet,
) -> Result<IntegrityCheck, LmError> {
    let pos = lm.true_prob(statement, prompts)?;
    let neg = lm.true_prob(negated, prompts)?;
    let (a, b) = (pos.argmax(), neg.argmax());
    let integrity = match (a, b) {
        (Some(Answer::True), Some(Answer::False)) => Integrity::IntegralTrue,
        (Some(Answer::False), Some(Answer::True)) => Integrity::IntegralFalse,
        _ => Integrity::NotIntegral,
    };
    Ok(IntegrityCheck {
        integrity,
        negated_text: negated.to_string(),
        true_prob: pos.true_prob,
        neg_true_prob: neg.true_prob,
        tie: a.is_none() || b.is_none(),
    })
}

/// Explanations of each answer to `question` at `depth` (1-based).
///
/// Exact duplicates within one label are merged, keeping first-seen order.
/// A label whose samples are all blank yields an empty list rather than an
/// error.
pub fn abduction(
    lm: &Lm<'_>,
    question: &str,
    config: &TreeConfig,
    depth: usize,
    prompts: &PromptSet,
) -> Result<(Vec<String>, Vec<String>), LmError> {
    let decoding = config.decoding_at(depth);
    let mut out = [Vec::new(), Vec::new()];
    for (slot, label) in out.iter_mut().zip(Answer::BOTH) {
        match lm.sample_abductive(question, label, prompts, &decoding) {
            Ok(texts) => *slot = dedup(texts),
            Err(LmError::EmptyGeneration) => {
                debug!("no usable {label} explanation for {question:?}");
            }
            Err(e) => return Err(e),
        }
    }
    let [t, f] = out;
    Ok((t, f))
}

fn dedup(texts: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    texts
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

fn negation(lm: &Lm<'_>, text: &str, config: &TreeConfig) -> Result<String, LmError> {
    lm.negate(text, config.negation_strategy)
}

fn checked(
    lm: &Lm<'_>,
    mut prop: Proposition,
    config: &TreeConfig,
    prompts: &PromptSet,
) -> Result<Proposition, BuildError> {
    let err = |stage, source| BuildError::Backend {
        stage,
        node: prop.id.clone(),
        source,
    };
    let negated = negation(lm, &prop.text, config).map_err(|e| err("negation", e))?;
    let check = check_integrity(lm, &prop.text, &negated, prompts)
        .map_err(|e| err("integrity check", e))?;
    check.apply(&mut prop);
    Ok(prop)
}

/// A node should be expanded when it is the root or was judged not integral.
fn needs_support(prop: &Proposition) -> bool {
    prop.is_root() || prop.integrity == Integrity::NotIntegral
}

/// Grows the tree for `question` breadth-first.
///
/// Nodes at one depth are generated and checked concurrently; the tree is
/// assembled in a fixed order afterwards, so the result depends only on the
/// backend's answers.
pub fn build_tree(
    lm: &Lm<'_>,
    question: &str,
    config: &TreeConfig,
    prompts: &PromptLibrary,
) -> Result<MaieuticTree, BuildError> {
    config.validate()?;
    if question.trim().is_empty() {
        return Err(BuildError::Backend {
            stage: "question",
            node: NodeId::root(),
            source: LmError::InvalidRequest("empty question".into()),
        });
    }
    // The root is checked like any node but never pruned on that basis.
    let root = Proposition::unchecked(NodeId::root(), question.trim(), PathLabel::root());
    let root = checked(lm, root, config, &prompts.qa)?;
    let mut tree = MaieuticTree::new(root, config.clone());

    let mut frontier = vec![NodeId::root()];
    for depth in 1..=config.depth_limit {
        let parents: Vec<Proposition> = frontier
            .iter()
            .filter_map(|id| tree.node(id))
            .filter(|p| needs_support(p))
            .cloned()
            .collect();
        if parents.is_empty() {
            break;
        }
        let grown: Vec<Vec<(Answer, Proposition)>> = parents
            .par_iter()
            .map(|parent| expand(lm, parent, config, depth, prompts))
            .collect::<Result<_, _>>()?;
        frontier.clear();
        for (parent, children) in parents.iter().zip(grown) {
            for (label, child) in children {
                frontier.push(child.id.clone());
                tree.add_child(&parent.id, label, child)
                    .expect("generated ids are unique and extend the parent path");
            }
        }
    }
    Ok(tree)
}

/// Generates and checks the children of one node.
fn expand(
    lm: &Lm<'_>,
    parent: &Proposition,
    config: &TreeConfig,
    depth: usize,
    prompts: &PromptLibrary,
) -> Result<Vec<(Answer, Proposition)>, BuildError> {
    let (t, f) =
        abduction(lm, &parent.text, config, depth, &prompts.abductive).map_err(|source| {
            BuildError::Backend {
                stage: "abduction",
                node: parent.id.clone(),
                source,
            }
        })?;
    let mut pending = Vec::new();
    for (label, texts) in [(Answer::True, t), (Answer::False, f)] {
        // An explanation that merely repeats its parent supports nothing.
        let kept = texts.into_iter().filter(|e| e.trim() != parent.text.trim());
        for (sibling, text) in kept.enumerate() {
            let child = Proposition::unchecked(
                parent.id.child(label, sibling),
                text,
                parent.path_label.extended(label),
            );
            pending.push((label, child));
        }
    }
    pending
        .into_par_iter()
        .map(|(label, child)| checked(lm, child, config, &prompts.qa).map(|c| (label, c)))
        .collect()
}

/// Removes non-integral leaves until none remain. The root always stays.
pub fn prune(tree: &MaieuticTree) -> MaieuticTree {
    let mut out = tree.clone();
    loop {
        let doomed: Vec<NodeId> = out
            .leaves()
            .into_iter()
            .filter(|p| !p.is_root() && !p.integrity.is_integral())
            .map(|p| p.id.clone())
            .collect();
        if doomed.is_empty() {
            return out;
        }
        for id in doomed {
            out.remove_leaf(&id)
                .expect("collected ids are current leaves");
        }
    }
}
