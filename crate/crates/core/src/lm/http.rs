//! Client for completion-style HTTP APIs (`POST {endpoint}` with
//! `model`, `prompt`, `max_tokens`, `temperature`, `top_p`, `n`, `stop`,
//! `logprobs`, `echo`; answers carry `choices[].text` and
//! `choices[].logprobs.{tokens, token_logprobs, top_logprobs, text_offset}`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::net::{self, PostError, RetryPolicy};
use crate::types::DecodingStrategy;

use super::{LmBackend, LmError, LmReply, LmRequest, LmResponse, RequestKind};

pub const ENDPOINT_VAR: &str = "MAIEUTIC_LM_ENDPOINT";
pub const API_KEY_VAR: &str = "MAIEUTIC_LM_API_KEY";
pub const MODEL_VAR: &str = "MAIEUTIC_LM_MODEL";

/// Top-k size requested for answer-position distributions.
const TOP_LOGPROBS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Read from the environment when empty.
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    /// Read from the environment when absent.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl HttpBackendConfig {
    /// Fills missing fields from `MAIEUTIC_LM_*` environment variables.
    pub fn with_env(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_VAR).ok();
        }
        if let Ok(endpoint) = std::env::var(ENDPOINT_VAR) {
            if self.endpoint.is_empty() {
                self.endpoint = endpoint;
            }
        }
        if let Ok(model) = std::env::var(MODEL_VAR) {
            if self.model.is_empty() {
                self.model = model;
            }
        }
        self
    }

    pub fn from_env() -> Result<Self, LmError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| LmError::InvalidRequest(format!("{ENDPOINT_VAR} is not set")))?;
        let model = std::env::var(MODEL_VAR)
            .map_err(|_| LmError::InvalidRequest(format!("{MODEL_VAR} is not set")))?;
        Ok(HttpBackendConfig {
            endpoint,
            model,
            api_key: std::env::var(API_KEY_VAR).ok(),
            retry: RetryPolicy::default(),
        })
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let client = net::client(&config.retry);
        let id = format!("http:{}", config.model);
        HttpBackend { config, client, id }
    }

    fn post(&self, body: Value) -> Result<Value, LmError> {
        net::post_json(
            &self.client,
            &self.config.endpoint,
            self.config.api_key.as_deref(),
            &body,
            &self.config.retry,
        )
        .map_err(|e| match e {
            PostError::Unavailable(m) => LmError::Unavailable(m),
            PostError::Rejected(code, m) => LmError::Unavailable(format!("HTTP {code}: {m}")),
            PostError::BadBody(m) => LmError::Malformed(m),
        })
    }

    pub fn request_body(&self, kind: &RequestKind) -> Value {
        match kind {
            RequestKind::AnswerDistribution { prompt } => json!({
                "model": self.config.model,
                "prompt": prompt,
                "max_tokens": 1,
                "temperature": 0.0,
                "logprobs": TOP_LOGPROBS,
            }),
            RequestKind::Generate { prompt, decoding } => {
                let (temperature, top_p) = match decoding.strategy {
                    DecodingStrategy::Greedy => (0.0, 1.0),
                    DecodingStrategy::Nucleus => (1.0, decoding.nucleus_p),
                };
                json!({
                    "model": self.config.model,
                    "prompt": prompt,
                    "max_tokens": decoding.max_tokens,
                    "temperature": temperature,
                    "top_p": top_p,
                    "n": decoding.sample_count,
                    "stop": decoding.stop_sequences,
                })
            }
            RequestKind::Score {
                prompt,
                continuation,
            } => json!({
                "model": self.config.model,
                "prompt": format!("{prompt}{continuation}"),
                "max_tokens": 0,
                "echo": true,
                "logprobs": 0,
            }),
        }
    }
}

fn choices(body: &Value) -> Result<&Vec<Value>, LmError> {
    body.get("choices")
        .and_then(Value::as_array)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| LmError::Malformed("response has no choices".into()))
}

fn logprobs(choice: &Value) -> Result<&Value, LmError> {
    match choice.get("logprobs") {
        Some(v) if !v.is_null() => Ok(v),
        _ => Err(LmError::NotSupported("API returned no logprobs".into())),
    }
}

/// Parses an answer-position top-k distribution.
pub fn parse_distribution(body: &Value) -> Result<LmResponse, LmError> {
    let lp = logprobs(&choices(body)?[0])?;
    let top = lp
        .get("top_logprobs")
        .and_then(Value::as_array)
        .and_then(|a| a.first())
        .and_then(Value::as_object)
        .ok_or_else(|| LmError::Malformed("missing top_logprobs".into()))?;
    let mut tokens = BTreeMap::new();
    for (token, logp) in top {
        let logp = logp
            .as_f64()
            .ok_or_else(|| LmError::Malformed(format!("non-numeric logprob for {token:?}")))?;
        if logp.is_nan() || logp > 0.0 {
            return Err(LmError::Malformed(format!(
                "invalid logprob {logp} for {token:?}"
            )));
        }
        tokens.insert(token.clone(), logp.exp());
    }
    Ok(LmResponse::Distribution { tokens })
}

pub fn parse_samples(body: &Value) -> Result<LmResponse, LmError> {
    let mut indexed = Vec::new();
    for (pos, c) in choices(body)?.iter().enumerate() {
        let text = c
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| LmError::Malformed("choice without text".into()))?;
        let index = c.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
        indexed.push((index, text.to_string()));
    }
    indexed.sort_by_key(|(i, _)| *i);
    Ok(LmResponse::Samples {
        texts: indexed.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Sums token log-probabilities of the echoed tokens starting at or after
/// character offset `prompt_chars`.
pub fn parse_score(body: &Value, prompt_chars: usize) -> Result<LmResponse, LmError> {
    let lp = logprobs(&choices(body)?[0])?;
    let values = lp
        .get("token_logprobs")
        .and_then(Value::as_array)
        .ok_or_else(|| LmError::NotSupported("API returned no token_logprobs".into()))?;
    let offsets = lp
        .get("text_offset")
        .and_then(Value::as_array)
        .ok_or_else(|| LmError::Malformed("missing text_offset".into()))?;
    if offsets.len() != values.len() {
        return Err(LmError::Malformed(
            "token_logprobs and text_offset differ in length".into(),
        ));
    }
    let mut total = 0.0;
    let mut counted = 0;
    for (v, off) in values.iter().zip(offsets) {
        let off = off
            .as_u64()
            .ok_or_else(|| LmError::Malformed("non-integer text offset".into()))?
            as usize;
        if off < prompt_chars {
            continue;
        }
        let v = v
            .as_f64()
            .ok_or_else(|| LmError::Malformed("null logprob inside continuation".into()))?;
        total += v;
        counted += 1;
    }
    if counted == 0 {
        return Err(LmError::Malformed(
            "no continuation tokens were scored".into(),
        ));
    }
    if !total.is_finite() {
        return Err(LmError::Malformed(format!(
            "log-likelihood {total} is not finite"
        )));
    }
    Ok(LmResponse::LogProb { value: total })
}

impl LmBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        let body = self.post(self.request_body(&request.kind))?;
        let response = match &request.kind {
            RequestKind::AnswerDistribution { .. } => parse_distribution(&body)?,
            RequestKind::Generate { .. } => parse_samples(&body)?,
            RequestKind::Score { prompt, .. } => parse_score(&body, prompt.chars().count())?,
        };
        Ok(LmReply {
            response,
            cached: false,
        })
    }
}
