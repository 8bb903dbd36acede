//! Human-readable rationales for an [`InferenceResult`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::compile::{clause_dump, DumpClause};
use crate::tree::{MaieuticTree, TreeDocument};
use crate::types::{Integrity, NodeId, Proposition};

use super::{InferenceResult, Method};

fn tf(value: bool) -> &'static str {
    if value {
        "True"
    } else {
        "False"
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Standard => "standard prompting",
        Method::ExplanationBased => "explanation-first prompting",
        Method::Maieutic => "maieutic inference",
    }
}

fn integrity_name(i: Integrity) -> &'static str {
    match i {
        Integrity::IntegralTrue => "integral, believed true",
        Integrity::IntegralFalse => "integral, believed false",
        Integrity::NotIntegral => "not integral",
        Integrity::Unchecked => "unchecked",
    }
}

/// True when the result has a solved tree to show.
fn solved(result: &InferenceResult) -> bool {
    !result.fallback_used && result.tree.is_some() && result.assignment.is_some()
}

fn fallback_line(result: &InferenceResult) -> String {
    format!(
        "Answer: {} (fallback to standard prompting: {})",
        tf(result.answer),
        result.fallback_reason.as_deref().unwrap_or("no tree")
    )
}

/// Plain-text rationale: the tree with truth values, each clause with its
/// status, and the satisfied weight.
pub fn explain_text(result: &InferenceResult) -> String {
    if result.method == Method::Maieutic && !solved(result) {
        return fallback_line(result) + "\n";
    }
    let mut out = String::new();
    writeln!(out, "Question: {}", result.question).unwrap();
    if !solved(result) {
        writeln!(
            out,
            "Answer: {} ({})",
            tf(result.answer),
            method_name(result.method)
        )
        .unwrap();
        if let Some(e) = &result.explanation {
            writeln!(out, "Explanation: {e}").unwrap();
        }
        if let Some(p) = result.true_prob {
            writeln!(out, "P(True) = {p:.4}").unwrap();
        }
        if let Some(reason) = &result.fallback_reason {
            writeln!(out, "Note: {reason}").unwrap();
        }
        return out;
    }
    let tree = result.tree.as_ref().expect("solved result has a tree");
    let assignment = result
        .assignment
        .as_ref()
        .expect("solved result has an assignment");
    let cnf = result.cnf.as_ref();
    let values = truth_map(result);
    writeln!(
        out,
        "Answer: {} ({})",
        tf(result.answer),
        method_name(result.method)
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "Tree:").unwrap();
    render_node(&mut out, tree, &NodeId::root(), &values, 0);
    if let Some(cnf) = cnf {
        writeln!(out).unwrap();
        writeln!(out, "Clauses:").unwrap();
        for (i, c) in clause_dump(cnf, Some(&assignment.values))
            .iter()
            .enumerate()
        {
            let lits: Vec<String> = c
                .literals
                .iter()
                .map(|l| format!("{}{}", if l.positive { "" } else { "¬" }, l.node))
                .collect();
            writeln!(
                out,
                "  [{}] #{i} {:<11} {:.4}  {}",
                if c.satisfied == Some(true) { "x" } else { " " },
                format!("{:?}", c.origin).to_lowercase(),
                c.weight,
                lits.join(" ∨ ")
            )
            .unwrap();
        }
        writeln!(
            out,
            "\nSatisfied weight: {:.4} of {:.4} ({} violated)",
            assignment.satisfied_weight,
            cnf.total_weight(),
            assignment.violated.len()
        )
        .unwrap();
    }
    out
}

fn render_node(
    out: &mut String,
    tree: &MaieuticTree,
    id: &NodeId,
    values: &BTreeMap<NodeId, bool>,
    depth: usize,
) {
    let p: &Proposition = tree.node(id).expect("rendering existing node");
    let value = values.get(id).map(|&v| tf(v)).unwrap_or("?");
    let edge = p
        .source_answer
        .map(|a| format!("{a} because: "))
        .unwrap_or_default();
    let belief = p
        .belief
        .map(|b| format!(", belief {b:+.3}"))
        .unwrap_or_default();
    writeln!(
        out,
        "{}[{value}] {id} {edge}{} ({}{belief})",
        "  ".repeat(depth + 1),
        p.text,
        integrity_name(p.integrity)
    )
    .unwrap();
    for (_, child) in tree.children_of(id) {
        render_node(out, tree, child, values, depth + 1);
    }
}

fn truth_map(result: &InferenceResult) -> BTreeMap<NodeId, bool> {
    match (&result.cnf, &result.assignment) {
        (Some(cnf), Some(a)) => a.by_node(cnf),
        _ => BTreeMap::new(),
    }
}

/// Graphviz view colored by assigned truth value; `None` without a tree.
pub fn explain_dot(result: &InferenceResult) -> Option<String> {
    result.tree.as_ref().map(|t| t.to_dot(&truth_map(result)))
}

#[derive(Debug, Serialize)]
pub struct Explanation {
    pub question: String,
    pub answer: bool,
    pub method: Method,
    pub fallback_used: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeDocument>,
    pub truth: BTreeMap<NodeId, bool>,
    pub clauses: Vec<DumpClause>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied_weight: Option<f64>,
}

/// Structured view: the tree document, per-node values and clause status.
pub fn explain_json(result: &InferenceResult) -> String {
    let clauses = match (&result.cnf, &result.assignment) {
        (Some(cnf), Some(a)) => clause_dump(cnf, Some(&a.values)),
        _ => Vec::new(),
    };
    let view = Explanation {
        question: result.question.clone(),
        answer: result.answer,
        method: result.method,
        fallback_used: result.fallback_used,
        fallback_reason: result.fallback_reason.clone(),
        tree: result.tree.as_ref().map(|t| t.to_document()),
        truth: truth_map(result),
        clauses,
        satisfied_weight: result.assignment.as_ref().map(|a| a.satisfied_weight),
    };
    serde_json::to_string_pretty(&view).expect("explanation serializes")
}
