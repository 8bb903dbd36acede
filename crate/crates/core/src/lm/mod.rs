//! Language-model access.
//!
//! Backends answer three low-level request kinds over fully rendered prompts:
//! the next-token distribution at an answer position, sampled completions,
//! and the log-likelihood of a fixed continuation. [`Lm`] layers the
//! engine's queries (truth probability, abductive sampling, sequence
//! likelihood, negation) on top, using the templates in [`prompt`].

pub mod cache;
pub mod http;
pub mod prompt;
pub mod scripted;
pub mod trace;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{
    checked_probability, Answer, DecodingParams, DecodingStrategy, NegationStrategy, PromptSet,
};

pub use cache::{CachedBackend, ResponseCache};
pub use http::{HttpBackend, HttpBackendConfig};
pub use scripted::{FixtureBuilder, ScriptedBackend};
pub use trace::{TraceRecord, TraceSink};

/// Surface forms scored at the answer position.
pub const TRUE_TOKEN: &str = " True";
pub const FALSE_TOKEN: &str = " False";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no fixture for request {digest} ({summary})")]
    MissingFixture { digest: String, summary: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("every sampled completion was empty")]
    EmptyGeneration,
    #[error("not supported by this backend: {0}")]
    NotSupported(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache entry {0} is corrupt")]
    CacheCorrupt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Why a request was issued. Recorded in traces; not part of the digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Truth,
    Abduction,
    Consistency,
    Negation,
    Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestKind {
    AnswerDistribution {
        prompt: String,
    },
    Generate {
        prompt: String,
        decoding: DecodingParams,
    },
    Score {
        prompt: String,
        continuation: String,
    },
}

impl RequestKind {
    /// Hex SHA-256 of the canonical JSON form. Greedy requests ignore `nucleus_p`.
    pub fn digest(&self) -> String {
        let canonical = match self {
            RequestKind::Generate { prompt, decoding }
                if decoding.strategy == DecodingStrategy::Greedy =>
            {
                RequestKind::Generate {
                    prompt: prompt.clone(),
                    decoding: DecodingParams {
                        nucleus_p: 1.0,
                        ..decoding.clone()
                    },
                }
            }
            other => other.clone(),
        };
        let json = serde_json::to_vec(&canonical).expect("request serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn prompt(&self) -> &str {
        match self {
            RequestKind::AnswerDistribution { prompt }
            | RequestKind::Generate { prompt, .. }
            | RequestKind::Score { prompt, .. } => prompt,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, RequestKind::Generate { decoding, .. } if decoding.is_stochastic())
    }

    fn summary(&self) -> String {
        let tail: String = {
            let p = self.prompt();
            let start = p.char_indices().rev().nth(60).map(|(i, _)| i).unwrap_or(0);
            p[start..].replace('\n', "\\n")
        };
        match self {
            RequestKind::AnswerDistribution { .. } => format!("answer distribution, ...{tail}"),
            RequestKind::Generate { .. } => format!("generate, ...{tail}"),
            RequestKind::Score { continuation, .. } => {
                format!("score {continuation:?} after ...{tail}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmRequest {
    pub purpose: Purpose,
    pub kind: RequestKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LmResponse {
    /// Probabilities (not log-probabilities) of next tokens.
    Distribution {
        tokens: BTreeMap<String, f64>,
    },
    Samples {
        texts: Vec<String>,
    },
    LogProb {
        value: f64,
    },
}

impl LmResponse {
    fn kind_name(&self) -> &'static str {
        match self {
            LmResponse::Distribution { .. } => "distribution",
            LmResponse::Samples { .. } => "samples",
            LmResponse::LogProb { .. } => "log_prob",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReply {
    pub response: LmResponse,
    /// Served from a response cache rather than the model.
    pub cached: bool,
}

/// A generative language model reachable through rendered prompts.
pub trait LmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError>;
}

impl<B: LmBackend + ?Sized> LmBackend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        (**self).call(request)
    }
}

impl<B: LmBackend + ?Sized> LmBackend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        (**self).call(request)
    }
}

impl<B: LmBackend + ?Sized> LmBackend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        (**self).call(request)
    }
}

/// Renormalized answer-token probabilities; the two always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthResponse {
    pub true_prob: f64,
    pub false_prob: f64,
}

impl TruthResponse {
    pub fn from_raw(p_true: f64, p_false: f64) -> Result<Self, LmError> {
        let t = checked_probability(p_true).map_err(|e| LmError::Malformed(e.to_string()))?;
        let f = checked_probability(p_false).map_err(|e| LmError::Malformed(e.to_string()))?;
        let total = t + f;
        if total <= 0.0 {
            return Err(LmError::Malformed(
                "both answer tokens have zero probability".into(),
            ));
        }
        let true_prob = t / total;
        Ok(TruthResponse {
            true_prob,
            false_prob: 1.0 - true_prob,
        })
    }

    /// Argmax label, or `None` on an exact tie.
    pub fn argmax(&self) -> Option<Answer> {
        if self.true_prob > self.false_prob {
            Some(Answer::True)
        } else if self.true_prob < self.false_prob {
            Some(Answer::False)
        } else {
            None
        }
    }
}

/// Engine-level queries over a backend.
#[derive(Clone, Copy)]
pub struct Lm<'a> {
    backend: &'a dyn LmBackend,
    trace: Option<&'a TraceSink>,
}

impl<'a> Lm<'a> {
    pub fn new(backend: &'a dyn LmBackend) -> Self {
        Lm {
            backend,
            trace: None,
        }
    }

    pub fn traced(backend: &'a dyn LmBackend, trace: &'a TraceSink) -> Self {
        Lm {
            backend,
            trace: Some(trace),
        }
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    fn call(&self, purpose: Purpose, kind: RequestKind) -> Result<LmResponse, LmError> {
        let started = Instant::now();
        let request = LmRequest { purpose, kind };
        let result = self.backend.call(&request);
        if let Some(trace) = self.trace {
            trace.record(TraceRecord {
                digest: request.kind.digest(),
                purpose,
                latency_us: started.elapsed().as_micros() as u64,
                cached: result.as_ref().map(|r| r.cached).unwrap_or(false),
                ok: result.is_ok(),
            });
        }
        result.map(|r| r.response)
    }

    fn answer_distribution(
        &self,
        purpose: Purpose,
        prompt: String,
    ) -> Result<TruthResponse, LmError> {
        match self.call(purpose, RequestKind::AnswerDistribution { prompt })? {
            LmResponse::Distribution { tokens } => {
                let t = tokens.get(TRUE_TOKEN).copied();
                let f = tokens.get(FALSE_TOKEN).copied();
                match (t, f) {
                    (Some(t), Some(f)) => TruthResponse::from_raw(t, f),
                    _ => Err(LmError::Malformed(format!(
                        "answer tokens {TRUE_TOKEN:?}/{FALSE_TOKEN:?} absent from distribution"
                    ))),
                }
            }
            other => Err(unexpected("distribution", &other)),
        }
    }

    /// Probability the model answers True for `statement`.
    pub fn true_prob(
        &self,
        statement: &str,
        prompts: &PromptSet,
    ) -> Result<TruthResponse, LmError> {
        non_empty(statement, "statement")?;
        let prompt = prompt::render_truth(prompts, statement)?;
        self.answer_distribution(Purpose::Truth, prompt)
    }

    /// Explanations rationalizing `label` as the answer to `question`.
    /// Blank completions are dropped; duplicates are kept.
    pub fn sample_abductive(
        &self,
        question: &str,
        label: Answer,
        prompts: &PromptSet,
        decoding: &DecodingParams,
    ) -> Result<Vec<String>, LmError> {
        non_empty(question, "question")?;
        decoding
            .validate()
            .map_err(|e| LmError::InvalidRequest(e.to_string()))?;
        let prompt = prompt::render_abductive(prompts, question, label)?;
        let texts = self.samples(Purpose::Abduction, prompt, decoding.clone())?;
        if texts.is_empty() {
            Err(LmError::EmptyGeneration)
        } else {
            Ok(texts)
        }
    }

    fn samples(
        &self,
        purpose: Purpose,
        prompt: String,
        decoding: DecodingParams,
    ) -> Result<Vec<String>, LmError> {
        match self.call(purpose, RequestKind::Generate { prompt, decoding })? {
            LmResponse::Samples { texts } => Ok(texts
                .into_iter()
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()),
            other => Err(unexpected("samples", &other)),
        }
    }

    /// Total log-likelihood of `explanation` following the abductive prompt
    /// for `(question, label)`.
    pub fn sequence_logprob(
        &self,
        explanation: &str,
        question: &str,
        label: Answer,
        prompts: &PromptSet,
    ) -> Result<f64, LmError> {
        non_empty(explanation, "explanation")?;
        let prompt = prompt::render_abductive(prompts, question, label)?;
        let continuation = format!(" {}", explanation.trim());
        match self.call(
            Purpose::Consistency,
            RequestKind::Score {
                prompt,
                continuation,
            },
        )? {
            LmResponse::LogProb { value } if value.is_finite() && value <= 0.0 => Ok(value),
            LmResponse::LogProb { value } => Err(LmError::Malformed(format!(
                "log-likelihood {value} is not finite and <= 0"
            ))),
            other => Err(unexpected("log_prob", &other)),
        }
    }

    /// Negation of `statement`.
    pub fn negate(&self, statement: &str, strategy: NegationStrategy) -> Result<String, LmError> {
        non_empty(statement, "statement")?;
        match strategy {
            NegationStrategy::Prefix => Ok(prompt::prefix_negation(statement)),
            NegationStrategy::LmGenerated => {
                let prompt = prompt::render_negation(statement);
                self.samples(Purpose::Negation, prompt, DecodingParams::greedy())?
                    .into_iter()
                    .next()
                    .ok_or(LmError::EmptyGeneration)
            }
        }
    }

    /// One greedy explanation for `question` before any answer is given.
    /// `None` when the model produced nothing usable.
    pub fn sample_explanation(
        &self,
        question: &str,
        prompts: &PromptSet,
    ) -> Result<Option<String>, LmError> {
        non_empty(question, "question")?;
        let prompt = prompt::render_explanation_query(prompts, question)?;
        let mut decoding = DecodingParams::greedy();
        decoding
            .stop_sequences
            .push(prompt::ANSWER_CUE.trim().to_string());
        Ok(self
            .samples(Purpose::Explanation, prompt, decoding)?
            .into_iter()
            .next())
    }

    /// Answer probabilities for `question` conditioned on a prior explanation.
    pub fn true_prob_explained(
        &self,
        question: &str,
        explanation: &str,
        prompts: &PromptSet,
    ) -> Result<TruthResponse, LmError> {
        non_empty(question, "question")?;
        let prompt = prompt::render_explained_answer(prompts, question, explanation)?;
        self.answer_distribution(Purpose::Truth, prompt)
    }
}

fn non_empty(text: &str, what: &str) -> Result<(), LmError> {
    if text.trim().is_empty() {
        Err(LmError::InvalidRequest(format!("empty {what}")))
    } else {
        Ok(())
    }
}

fn unexpected(expected: &str, got: &LmResponse) -> LmError {
    LmError::Malformed(format!(
        "expected {expected} response, got {}",
        got.kind_name()
    ))
}
