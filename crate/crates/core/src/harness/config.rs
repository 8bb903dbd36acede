//! Run configuration, read from TOML (`.toml`) or JSON (anything else).
//!
//! ```toml
//! method = "maieutic"
//! mode = "likelihood"          # or "verifier"
//! seed = 7
//! parallelism = 4
//! cache_dir = "cache"
//!
//! [backend]
//! kind = "scripted"
//! fixtures = "fixtures/lm.json"
//!
//! [verifier]
//! kind = "http"
//! endpoint = "http://localhost:8000/nli"
//!
//! [prompts]
//! qa = "prompts/qa.json"
//!
//! [tree]
//! depth_limit = 2
//! width_schedule = [3, 1]
//! ```
//!
//! Relative paths are resolved against the config file's directory. API
//! credentials come only from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compile::CompileMode;
use crate::lm::{
    CachedBackend, HttpBackend, HttpBackendConfig, LmBackend, LmError, ResponseCache,
    ScriptedBackend,
};
use crate::types::{PromptLibrary, PromptMode, PromptSet, TreeConfig};
use crate::verifier::{
    HttpVerifier, HttpVerifierConfig, RelationOptions, ScriptedVerifier, Verifier, VerifierError,
};

use super::{EngineSettings, Method};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("prompt set {path}: {message}")]
    Prompts { path: PathBuf, message: String },
    #[error("no language-model backend configured")]
    NoBackend,
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted { fixtures: PathBuf },
    Http(HttpBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifierConfig {
    Scripted { fixtures: PathBuf },
    Http(HttpVerifierConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptPaths {
    pub qa: Option<PathBuf>,
    pub explanation: Option<PathBuf>,
    pub abductive: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub mode: CompileMode,
    pub seed: Option<u64>,
    pub parallelism: usize,
    pub tree: TreeConfig,
    pub backend: Option<BackendConfig>,
    pub verifier: Option<VerifierConfig>,
    pub prompts: PromptPaths,
    pub cache_dir: Option<PathBuf>,
    pub relations: RelationOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Maieutic,
            mode: CompileMode::Likelihood,
            seed: None,
            parallelism: 4,
            tree: TreeConfig::default(),
            backend: None,
            verifier: None,
            prompts: PromptPaths::default(),
            cache_dir: None,
            relations: RelationOptions::default(),
        }
    }
}

/// Opened backends for a run.
pub struct Backends {
    pub lm: Box<dyn LmBackend>,
    pub verifier: Option<Box<dyn Verifier>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let invalid = |message: String| ConfigError::Invalid {
            path: path.to_path_buf(),
            message,
        };
        let mut config: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&raw).map_err(|e| invalid(e.to_string()))?
        } else {
            serde_json::from_str(&raw).map_err(|e| invalid(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate().map_err(invalid)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be >= 1".into());
        }
        self.tree.validate().map_err(|e| e.to_string())
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(BackendConfig::Scripted { fixtures }) = &mut self.backend {
            fix(fixtures);
        }
        if let Some(VerifierConfig::Scripted { fixtures }) = &mut self.verifier {
            fix(fixtures);
        }
        for p in [
            &mut self.prompts.qa,
            &mut self.prompts.explanation,
            &mut self.prompts.abductive,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(c) = &mut self.cache_dir {
            fix(c);
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn prompt_library(&self) -> Result<PromptLibrary, ConfigError> {
        let load = |path: &Option<PathBuf>, mode: PromptMode| -> Result<PromptSet, ConfigError> {
            let Some(path) = path else {
                return Ok(PromptSet::builtin(mode));
            };
            let err = |message: String| ConfigError::Prompts {
                path: path.clone(),
                message,
            };
            let set = PromptSet::load(path).map_err(|e| err(e.to_string()))?;
            if set.mode() != mode {
                return Err(err(format!(
                    "expected mode {mode:?}, found {:?}",
                    set.mode()
                )));
            }
            Ok(set)
        };
        Ok(PromptLibrary {
            qa: load(&self.prompts.qa, PromptMode::QaPairs)?,
            explanation: load(&self.prompts.explanation, PromptMode::QaExplanationTriples)?,
            abductive: load(&self.prompts.abductive, PromptMode::AbductiveTriples)?,
        })
    }

    pub fn settings(&self) -> Result<EngineSettings, ConfigError> {
        Ok(EngineSettings {
            prompts: self.prompt_library()?,
            tree: self.tree.clone(),
            mode: self.mode,
            relations: self.relations,
        })
    }

    pub fn open_backends(&self) -> Result<Backends, ConfigError> {
        let inner: Box<dyn LmBackend> = match &self.backend {
            None => return Err(ConfigError::NoBackend),
            Some(BackendConfig::Scripted { fixtures }) => {
                Box::new(ScriptedBackend::load(fixtures)?)
            }
            Some(BackendConfig::Http(http)) => {
                let http = http.clone().with_env();
                if http.endpoint.is_empty() || http.model.is_empty() {
                    return Err(ConfigError::Lm(LmError::InvalidRequest(
                        "HTTP backend needs an endpoint and a model".into(),
                    )));
                }
                Box::new(HttpBackend::new(http))
            }
        };
        let lm: Box<dyn LmBackend> = match &self.cache_dir {
            Some(dir) => Box::new(CachedBackend::new(
                inner,
                ResponseCache::open(dir)?,
                self.seed,
            )),
            None => inner,
        };
        let verifier: Option<Box<dyn Verifier>> = match &self.verifier {
            None => None,
            Some(VerifierConfig::Scripted { fixtures }) => {
                Some(Box::new(ScriptedVerifier::load(fixtures)?))
            }
            Some(VerifierConfig::Http(http)) => Some(Box::new(HttpVerifier::new(http.clone()))),
        };
        Ok(Backends { lm, verifier })
    }
}
