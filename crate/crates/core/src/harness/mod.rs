//! Question answering end to end, baselines, datasets and evaluation runs.
//!
//! [`Engine`] ties a language model, an optional verifier and the engine
//! settings together and answers questions with one of three [`Method`]s:
//! plain prompting, explanation-first prompting, or the full
//! tree → clauses → MAX-SAT pipeline.

pub mod config;
pub mod dataset;
pub mod explain;
pub mod metrics;
pub mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{build_tree, prune, BuildError};
use crate::compile::{compile, CompileError, CompileMode, Relations};
use crate::lm::{Lm, LmBackend, LmError, TraceRecord, TraceSink};
use crate::maxsat::{solve, Assignment};
use crate::tree::MaieuticTree;
use crate::types::{PromptLibrary, TreeConfig, WeightedCnf};
use crate::verifier::{RelationOptions, Verifier};

pub use config::RunConfig;
pub use dataset::{load_dataset, DatasetError, DatasetRecord};
pub use metrics::{compute_metrics, Metrics};
pub use run::{evaluate, EvalReport, RecordOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    ExplanationBased,
    Maieutic,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard" => Ok(Method::Standard),
            "explanation_based" | "explanation" | "cot" => Ok(Method::ExplanationBased),
            "maieutic" => Ok(Method::Maieutic),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("building the tree failed: {source} (after {} backend calls)", trace.len())]
    Build {
        #[source]
        source: BuildError,
        trace: Vec<TraceRecord>,
    },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("verifier mode requires a verifier")]
    NoVerifier,
}

/// The answer to one question, with everything needed to explain it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub question: String,
    pub answer: bool,
    pub method: Method,
    /// Renormalized P(True) of the direct answer, when one was taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    /// The pruned tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<MaieuticTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<CompileMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnf: Option<WeightedCnf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Assignment>,
    /// Texts of generated propositions assigned True, in tree order.
    pub true_propositions: Vec<String>,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

impl InferenceResult {
    fn direct(question: &str, method: Method, true_prob: f64, tie: bool) -> Self {
        InferenceResult {
            question: question.to_string(),
            // A tie carries no answer; False is the documented default.
            answer: !tie && true_prob > 0.5,
            method,
            true_prob: Some(true_prob),
            explanation: None,
            tree: None,
            mode: None,
            cnf: None,
            assignment: None,
            true_propositions: Vec::new(),
            fallback_used: tie,
            fallback_reason: tie.then(|| "answer probabilities tied at 0.5".to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }
}

/// Engine settings independent of the backends.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub prompts: PromptLibrary,
    pub tree: TreeConfig,
    pub mode: CompileMode,
    pub relations: RelationOptions,
}

pub struct Engine<'a> {
    backend: &'a dyn LmBackend,
    verifier: Option<&'a dyn Verifier>,
    pub settings: EngineSettings,
}

impl<'a> Engine<'a> {
    pub fn new(backend: &'a dyn LmBackend, settings: EngineSettings) -> Self {
        Engine {
            backend,
            verifier: None,
            settings,
        }
    }

    pub fn with_verifier(mut self, verifier: &'a dyn Verifier) -> Self {
        self.verifier = Some(verifier);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn verifier_id(&self) -> Option<&str> {
        self.verifier.map(|v| v.id())
    }

    pub fn infer(&self, question: &str, method: Method) -> Result<InferenceResult, InferenceError> {
        self.infer_traced(question, method, &TraceSink::new())
    }

    /// Like [`infer`](Self::infer), recording every backend call in `trace`.
    pub fn infer_traced(
        &self,
        question: &str,
        method: Method,
        trace: &TraceSink,
    ) -> Result<InferenceResult, InferenceError> {
        let lm = Lm::traced(self.backend, trace);
        match method {
            Method::Standard => self.standard(&lm, question),
            Method::ExplanationBased => self.explanation_based(&lm, question),
            Method::Maieutic => self.maieutic(&lm, question, trace),
        }
    }

    fn standard(&self, lm: &Lm<'_>, question: &str) -> Result<InferenceResult, InferenceError> {
        let r = lm.true_prob(question, &self.settings.prompts.qa)?;
        Ok(InferenceResult::direct(
            question,
            Method::Standard,
            r.true_prob,
            r.argmax().is_none(),
        ))
    }

    fn explanation_based(
        &self,
        lm: &Lm<'_>,
        question: &str,
    ) -> Result<InferenceResult, InferenceError> {
        let prompts = &self.settings.prompts.explanation;
        let Some(explanation) = lm.sample_explanation(question, prompts)? else {
            let mut r = self.standard(lm, question)?;
            r.method = Method::ExplanationBased;
            r.fallback_used = true;
            r.fallback_reason = Some("no explanation was generated".into());
            return Ok(r);
        };
        let r = lm.true_prob_explained(question, &explanation, prompts)?;
        let mut result = InferenceResult::direct(
            question,
            Method::ExplanationBased,
            r.true_prob,
            r.argmax().is_none(),
        );
        result.explanation = Some(explanation);
        Ok(result)
    }

    fn maieutic(
        &self,
        lm: &Lm<'_>,
        question: &str,
        trace: &TraceSink,
    ) -> Result<InferenceResult, InferenceError> {
        let s = &self.settings;
        let tree = build_tree(lm, question, &s.tree, &s.prompts).map_err(|source| {
            InferenceError::Build {
                source,
                trace: trace.records(),
            }
        })?;
        let pruned = prune(&tree);
        if pruned.is_trivial() {
            let mut r = self.standard(lm, question)?;
            r.method = Method::Maieutic;
            r.fallback_used = true;
            r.fallback_reason = Some(match r.fallback_reason {
                Some(tie) => format!("no integral explanations survived pruning; {tie}"),
                None => "no integral explanations survived pruning".into(),
            });
            r.tree = Some(pruned);
            return Ok(r);
        }

        let (mode, cnf) = self.compile(lm, &pruned)?;
        let assignment = solve(&cnf);
        let answer = assignment.values[0];
        let true_propositions = pruned
            .nodes()
            .iter()
            .zip(&assignment.values)
            .filter(|(p, &v)| v && !p.is_root())
            .map(|(p, _)| p.text.clone())
            .collect();
        let result = InferenceResult {
            question: question.to_string(),
            answer,
            method: Method::Maieutic,
            true_prob: None,
            explanation: None,
            tree: Some(pruned),
            mode: Some(mode),
            cnf: Some(cnf),
            assignment: Some(assignment),
            true_propositions,
            fallback_used: false,
            fallback_reason: None,
        };
        assert_eq!(
            Some(result.answer),
            result.assignment.as_ref().map(|a| a.values[0]),
            "answer must be the root's assigned value"
        );
        Ok(result)
    }

    /// Compiles in the configured mode. A backend without log-likelihoods
    /// switches likelihood mode to verifier mode when a verifier exists.
    fn compile(
        &self,
        lm: &Lm<'_>,
        tree: &MaieuticTree,
    ) -> Result<(CompileMode, WeightedCnf), InferenceError> {
        let s = &self.settings;
        let verifier_relations = || {
            self.verifier
                .map(|verifier| Relations::Verifier {
                    verifier,
                    options: s.relations,
                })
                .ok_or(InferenceError::NoVerifier)
        };
        match s.mode {
            CompileMode::Verifier => {
                Ok((CompileMode::Verifier, compile(tree, verifier_relations()?)?))
            }
            CompileMode::Likelihood => {
                let relations = Relations::Likelihood {
                    lm,
                    prompts: &s.prompts.abductive,
                };
                match compile(tree, relations) {
                    Ok(cnf) => Ok((CompileMode::Likelihood, cnf)),
                    Err(e) if e.is_not_supported() && self.verifier.is_some() => {
                        log::warn!("{e}; switching to verifier mode");
                        Ok((CompileMode::Verifier, compile(tree, verifier_relations()?)?))
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }
}
