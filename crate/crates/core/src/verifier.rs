//! Natural-language-inference verification.
//!
//! A verifier labels an ordered pair of sentences as entailment,
//! contradiction or neutral. Over a tree, every ordered pair of distinct
//! nodes (the question included) is judged; entailment `E1 ⇒ E2` becomes the
//! clause `¬E1 ∨ E2`, contradiction becomes `¬E1 ∨ ¬E2`, and neutral pairs
//! contribute nothing.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::net::{self, PostError, RetryPolicy};
use crate::tree::MaieuticTree;
use crate::types::{ClauseOrigin, Literal, NodeId, Var, WeightedClause};

pub const NLI_ENDPOINT_VAR: &str = "MAIEUTIC_NLI_ENDPOINT";

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("verifier unavailable: {0}")]
    Unavailable(String),
    #[error("no NLI fixture for premise {premise:?} / hypothesis {hypothesis:?}")]
    MissingFixture { premise: String, hypothesis: String },
    #[error("malformed verifier response: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entail,
    Neutral,
    Contradict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelProbs {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

impl LabelProbs {
    pub fn certain(label: NliLabel) -> Self {
        let mut p = LabelProbs {
            entail: 0.0,
            neutral: 0.0,
            contradict: 0.0,
        };
        *p.get_mut(label) = 1.0;
        p
    }

    pub fn get(&self, label: NliLabel) -> f64 {
        match label {
            NliLabel::Entail => self.entail,
            NliLabel::Neutral => self.neutral,
            NliLabel::Contradict => self.contradict,
        }
    }

    fn get_mut(&mut self, label: NliLabel) -> &mut f64 {
        match label {
            NliLabel::Entail => &mut self.entail,
            NliLabel::Neutral => &mut self.neutral,
            NliLabel::Contradict => &mut self.contradict,
        }
    }

    /// The most probable label; exact ties resolve toward neutral, then
    /// entailment.
    pub fn argmax(&self) -> NliLabel {
        [NliLabel::Neutral, NliLabel::Entail, NliLabel::Contradict]
            .into_iter()
            .fold(NliLabel::Neutral, |best, l| {
                if self.get(l) > self.get(best) {
                    l
                } else {
                    best
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliJudgment {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub probs: LabelProbs,
}

impl NliJudgment {
    pub fn validate(&self) -> Result<(), VerifierError> {
        let p = &self.probs;
        let all = [p.entail, p.neutral, p.contradict];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(VerifierError::Malformed(format!(
                "label probabilities {all:?} out of range"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(VerifierError::Malformed(format!(
                "label probabilities sum to {sum}"
            )));
        }
        if p.get(self.label) < all.iter().cloned().fold(f64::MIN, f64::max) {
            return Err(VerifierError::Malformed(format!(
                "label {:?} is not the most probable",
                self.label
            )));
        }
        Ok(())
    }
}

pub trait Verifier: Send + Sync {
    fn id(&self) -> &str;
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, VerifierError>;
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, VerifierError> {
        (**self).nli(premise, hypothesis)
    }
}

impl<V: Verifier + ?Sized> Verifier for Box<V> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, VerifierError> {
        (**self).nli(premise, hypothesis)
    }
}

fn check_inputs(premise: &str, hypothesis: &str) -> Result<(), VerifierError> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(VerifierError::InvalidRequest(
            "empty premise or hypothesis".into(),
        ));
    }
    Ok(())
}

/// Table-driven verifier. A sentence always entails itself.
#[derive(Debug, Clone)]
pub struct ScriptedVerifier {
    id: String,
    table: HashMap<(String, String), NliJudgment>,
}

impl ScriptedVerifier {
    pub fn new(id: impl Into<String>, judgments: Vec<NliJudgment>) -> Result<Self, VerifierError> {
        let mut table = HashMap::new();
        for j in judgments {
            j.validate()?;
            table.insert((j.premise.clone(), j.hypothesis.clone()), j);
        }
        Ok(ScriptedVerifier {
            id: id.into(),
            table,
        })
    }

    /// Loads a JSON list of judgments.
    pub fn load(path: &Path) -> Result<Self, VerifierError> {
        let raw = std::fs::read_to_string(path)?;
        let judgments: Vec<NliJudgment> =
            serde_json::from_str(&raw).map_err(|e| VerifierError::Malformed(e.to_string()))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("fixtures");
        ScriptedVerifier::new(format!("scripted-nli:{stem}"), judgments)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Verifier for ScriptedVerifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, VerifierError> {
        check_inputs(premise, hypothesis)?;
        if let Some(j) = self
            .table
            .get(&(premise.to_string(), hypothesis.to_string()))
        {
            return Ok(j.clone());
        }
        if premise == hypothesis {
            return Ok(NliJudgment {
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
                label: NliLabel::Entail,
                probs: LabelProbs::certain(NliLabel::Entail),
            });
        }
        Err(VerifierError::MissingFixture {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpVerifierConfig {
    pub endpoint: String,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl HttpVerifierConfig {
    pub fn from_env() -> Result<Self, VerifierError> {
        let endpoint = std::env::var(NLI_ENDPOINT_VAR)
            .map_err(|_| VerifierError::InvalidRequest(format!("{NLI_ENDPOINT_VAR} is not set")))?;
        Ok(HttpVerifierConfig {
            endpoint,
            retry: RetryPolicy::default(),
        })
    }
}

/// Client for a service answering `POST {premise, hypothesis}` with
/// `{label, probs: {entail, neutral, contradict}}`.
pub struct HttpVerifier {
    config: HttpVerifierConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl HttpVerifier {
    pub fn new(config: HttpVerifierConfig) -> Self {
        let client = net::client(&config.retry);
        let id = format!("http-nli:{}", config.endpoint);
        HttpVerifier { config, client, id }
    }
}

#[derive(Deserialize)]
struct WireJudgment {
    label: NliLabel,
    probs: LabelProbs,
}

impl Verifier for HttpVerifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, VerifierError> {
        check_inputs(premise, hypothesis)?;
        let body = json!({"premise": premise, "hypothesis": hypothesis});
        let reply = net::post_json(
            &self.client,
            &self.config.endpoint,
            None,
            &body,
            &self.config.retry,
        )
        .map_err(|e| match e {
            PostError::Unavailable(m) => VerifierError::Unavailable(m),
            PostError::Rejected(code, m) => VerifierError::Unavailable(format!("HTTP {code}: {m}")),
            PostError::BadBody(m) => VerifierError::Malformed(m),
        })?;
        let wire: WireJudgment =
            serde_json::from_value(reply).map_err(|e| VerifierError::Malformed(e.to_string()))?;
        let judgment = NliJudgment {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
            label: wire.label,
            probs: wire.probs,
        };
        judgment.validate()?;
        Ok(judgment)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelationOptions {
    /// Weight each clause by the verifier's probability for its label instead
    /// of the constant 1.
    pub probability_weights: bool,
}

/// Clauses from judging every ordered pair of distinct nodes.
///
/// Variables follow the tree's pre-order (root is variable 0). Pairs are
/// judged concurrently and emitted in pair order; clauses with an identical
/// literal set are merged, keeping the first.
pub fn relation_clauses(
    tree: &MaieuticTree,
    verifier: &dyn Verifier,
    options: RelationOptions,
) -> Result<Vec<WeightedClause>, VerifierError> {
    let nodes = tree.nodes();
    let pairs: Vec<(usize, usize)> = (0..nodes.len())
        .flat_map(|i| {
            (0..nodes.len())
                .filter(move |&j| j != i)
                .map(move |j| (i, j))
        })
        .collect();
    let judgments: Vec<NliJudgment> = pairs
        .par_iter()
        .map(|&(i, j)| verifier.nli(&nodes[i].text, &nodes[j].text))
        .collect::<Result<_, _>>()?;

    let mut seen = HashSet::new();
    let mut clauses = Vec::new();
    for (&(i, j), judgment) in pairs.iter().zip(&judgments) {
        let (a, b) = (Var(i as u32), Var(j as u32));
        let literals = match judgment.label {
            NliLabel::Entail => vec![Literal::neg(a), Literal::pos(b)],
            NliLabel::Contradict => vec![Literal::neg(a), Literal::neg(b)],
            NliLabel::Neutral => continue,
        };
        let weight = if options.probability_weights {
            judgment.probs.get(judgment.label)
        } else {
            1.0
        };
        let clause = WeightedClause::new(literals, weight, ClauseOrigin::Nli).map_err(|e| {
            VerifierError::Malformed(format!("{}: {e}", pair_name(&nodes[i].id, &nodes[j].id)))
        })?;
        if seen.insert(clause.literal_set()) {
            clauses.push(clause);
        }
    }
    Ok(clauses)
}

fn pair_name(a: &NodeId, b: &NodeId) -> String {
    format!("({a}, {b})")
}
