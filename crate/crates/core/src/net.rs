//! Blocking JSON POST with bounded exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 500,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug)]
pub(crate) enum PostError {
    /// Transport failure or retryable status after every attempt.
    Unavailable(String),
    /// Non-retryable HTTP status.
    Rejected(u16, String),
    /// Body was not JSON.
    BadBody(String),
}

pub(crate) fn client(policy: &RetryPolicy) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(policy.timeout_secs))
        .build()
        .expect("http client builds")
}

pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    bearer: Option<&str>,
    body: &Value,
    policy: &RetryPolicy,
) -> Result<Value, PostError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = policy
                .initial_backoff_ms
                .saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut req = client.post(url).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let text = resp.text().map_err(|e| PostError::BadBody(e.to_string()))?;
                    return serde_json::from_str(&text)
                        .map_err(|e| PostError::BadBody(e.to_string()));
                }
                let text = resp.text().unwrap_or_default();
                if status.as_u16() == 429 || status.is_server_error() {
                    last = format!("HTTP {status}: {text}");
                    log::warn!("{url}: attempt {} failed with {status}", attempt + 1);
                    continue;
                }
                return Err(PostError::Rejected(status.as_u16(), text));
            }
            Err(e) => {
                last = e.to_string();
                log::warn!("{url}: attempt {} failed: {e}", attempt + 1);
            }
        }
    }
    Err(PostError::Unavailable(format!(
        "{url} after {attempts} attempts: {last}"
    )))
}
