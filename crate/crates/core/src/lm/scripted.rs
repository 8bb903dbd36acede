//! Deterministic backend replaying hand-authored fixtures.
//!
//! A fixture file is a flat JSON object from request digest to response. A
//! sidecar (`<name>.prompts.json`) maps the same digests to the full request
//! so that fixtures stay reviewable. [`FixtureBuilder`] renders prompts with
//! the engine's own templates, so fixtures can be authored from statements
//! instead of digests.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use crate::types::{Answer, DecodingParams, PromptLibrary};

use super::{prompt, LmBackend, LmError, LmReply, LmRequest, LmResponse, RequestKind};
use super::{FALSE_TOKEN, TRUE_TOKEN};

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    responses: HashMap<String, LmResponse>,
}

impl ScriptedBackend {
    pub fn new(
        id: impl Into<String>,
        responses: HashMap<String, LmResponse>,
    ) -> Result<Self, LmError> {
        for (digest, response) in &responses {
            validate_response(response)
                .map_err(|e| LmError::Malformed(format!("fixture {digest}: {e}")))?;
        }
        Ok(ScriptedBackend {
            id: id.into(),
            responses,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let raw = std::fs::read_to_string(path)?;
        let responses: HashMap<String, LmResponse> = serde_json::from_str(&raw)
            .map_err(|e| LmError::Malformed(format!("{}: {e}", path.display())))?;
        let id = format!(
            "scripted:{}",
            path.file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("fixtures")
        );
        ScriptedBackend::new(id, responses)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

fn validate_response(response: &LmResponse) -> Result<(), String> {
    match response {
        LmResponse::Distribution { tokens } => {
            for (t, p) in tokens {
                if !p.is_finite() || !(0.0..=1.0).contains(p) {
                    return Err(format!("token {t:?} has probability {p}"));
                }
            }
            Ok(())
        }
        LmResponse::LogProb { value } if !value.is_finite() => {
            Err(format!("log-likelihood {value} is not finite"))
        }
        _ => Ok(()),
    }
}

impl LmBackend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        let digest = request.kind.digest();
        match self.responses.get(&digest) {
            Some(response) => Ok(LmReply {
                response: response.clone(),
                cached: false,
            }),
            None => Err(LmError::MissingFixture {
                summary: request.kind.summary(),
                digest,
            }),
        }
    }
}

/// Sidecar path for a fixture file: `x.json` → `x.prompts.json`.
pub fn sidecar_path(fixture: &Path) -> PathBuf {
    let stem = fixture
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("fixtures");
    fixture.with_file_name(format!("{stem}.prompts.json"))
}

/// Authors fixtures by rendering the same prompts the engine will send.
#[derive(Debug, Clone)]
pub struct FixtureBuilder {
    prompts: PromptLibrary,
    entries: BTreeMap<String, (RequestKind, LmResponse)>,
}

impl FixtureBuilder {
    pub fn new(prompts: PromptLibrary) -> Self {
        FixtureBuilder {
            prompts,
            entries: BTreeMap::new(),
        }
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    /// Adds (or replaces) the response for a raw request.
    pub fn insert(&mut self, kind: RequestKind, response: LmResponse) {
        self.entries.insert(kind.digest(), (kind, response));
    }

    pub fn add(mut self, kind: RequestKind, response: LmResponse) -> Self {
        self.insert(kind, response);
        self
    }

    /// Raw answer-token probabilities for `statement` under the QA prompt.
    pub fn truth(self, statement: &str, p_true: f64, p_false: f64) -> Self {
        let mut tokens = BTreeMap::new();
        tokens.insert(TRUE_TOKEN.to_string(), p_true);
        tokens.insert(FALSE_TOKEN.to_string(), p_false);
        self.truth_tokens(statement, tokens)
    }

    pub fn truth_tokens(self, statement: &str, tokens: BTreeMap<String, f64>) -> Self {
        let prompt = prompt::render_truth(&self.prompts.qa, statement).expect("qa prompt set");
        self.add(
            RequestKind::AnswerDistribution { prompt },
            LmResponse::Distribution { tokens },
        )
    }

    /// Truth probabilities for both `statement` and its prefix negation.
    pub fn truth_pair(self, statement: &str, p_true: f64, neg_p_true: f64) -> Self {
        let negated = prompt::prefix_negation(statement);
        self.truth(statement, p_true, 1.0 - p_true)
            .truth(&negated, neg_p_true, 1.0 - neg_p_true)
    }

    pub fn abduction(
        self,
        question: &str,
        label: Answer,
        decoding: &DecodingParams,
        texts: &[&str],
    ) -> Self {
        let prompt = prompt::render_abductive(&self.prompts.abductive, question, label)
            .expect("abductive prompt set");
        self.add(
            RequestKind::Generate {
                prompt,
                decoding: decoding.clone(),
            },
            LmResponse::Samples {
                texts: texts.iter().map(|t| t.to_string()).collect(),
            },
        )
    }

    pub fn logprob(self, explanation: &str, question: &str, label: Answer, value: f64) -> Self {
        let prompt = prompt::render_abductive(&self.prompts.abductive, question, label)
            .expect("abductive prompt set");
        self.add(
            RequestKind::Score {
                prompt,
                continuation: format!(" {}", explanation.trim()),
            },
            LmResponse::LogProb { value },
        )
    }

    pub fn negation(self, statement: &str, negated: &str) -> Self {
        self.add(
            RequestKind::Generate {
                prompt: prompt::render_negation(statement),
                decoding: DecodingParams::greedy(),
            },
            LmResponse::Samples {
                texts: vec![negated.to_string()],
            },
        )
    }

    /// Greedy explanation for the explanation-first baseline.
    pub fn explanation(self, question: &str, text: &str) -> Self {
        let prompt = prompt::render_explanation_query(&self.prompts.explanation, question)
            .expect("explanation prompt set");
        let mut decoding = DecodingParams::greedy();
        decoding
            .stop_sequences
            .push(prompt::ANSWER_CUE.trim().to_string());
        self.add(
            RequestKind::Generate { prompt, decoding },
            LmResponse::Samples {
                texts: vec![text.to_string()],
            },
        )
    }

    pub fn explained_answer(
        self,
        question: &str,
        explanation: &str,
        p_true: f64,
        p_false: f64,
    ) -> Self {
        let prompt =
            prompt::render_explained_answer(&self.prompts.explanation, question, explanation)
                .expect("explanation prompt set");
        let mut tokens = BTreeMap::new();
        tokens.insert(TRUE_TOKEN.to_string(), p_true);
        tokens.insert(FALSE_TOKEN.to_string(), p_false);
        self.add(
            RequestKind::AnswerDistribution { prompt },
            LmResponse::Distribution { tokens },
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(&self, id: &str) -> ScriptedBackend {
        let responses = self
            .entries
            .iter()
            .map(|(d, (_, r))| (d.clone(), r.clone()))
            .collect();
        ScriptedBackend::new(id, responses).expect("authored fixtures are valid")
    }

    /// Fixture JSON (digest → response), sorted by digest.
    pub fn fixture_json(&self) -> String {
        let map: BTreeMap<&String, &LmResponse> =
            self.entries.iter().map(|(d, (_, r))| (d, r)).collect();
        serde_json::to_string_pretty(&map).expect("fixtures serialize")
    }

    /// Sidecar JSON (digest → request).
    pub fn sidecar_json(&self) -> String {
        let map: BTreeMap<&String, &RequestKind> =
            self.entries.iter().map(|(d, (k, _))| (d, k)).collect();
        serde_json::to_string_pretty(&map).expect("sidecar serializes")
    }

    /// Writes the fixture file and its sidecar.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.fixture_json())?;
        std::fs::write(sidecar_path(path), self.sidecar_json())
    }
}
