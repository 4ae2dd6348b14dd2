//! Completion providers: the generation-backend abstraction and the
//! deterministic scripted mock used by the evaluation harness.
//!
//! The pipeline only ever talks to [`CompletionProvider`]. The shipped
//! [`ScriptedProvider`] answers from a JSON script keyed by prompt id, which
//! keeps every run offline and reproducible; a thin HTTP adapter for
//! chat-completions-style backends is available behind the `live-provider`
//! feature and plays no part in the test suite.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single generation request.
///
/// `prompt_id` identifies the corpus prompt so scripted providers can answer
/// by id; this is also what keeps masked-corpus runs aligned with the same
/// scripted completions as the original run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_id: String,
    pub prompt_text: String,
    pub k: u32,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(prompt_id: impl Into<String>, prompt_text: impl Into<String>) -> Self {
        GenerationRequest {
            prompt_id: prompt_id.into(),
            prompt_text: prompt_text.into(),
            k: 1,
            temperature: 0.7,
        }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.k == 0 {
            return Err(ProviderError::InvalidRequest("k must be positive".to_string()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature must be in [0, 2], got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Completions returned by a provider, with optional per-token
/// log-probabilities aligned one list per completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub completions: Vec<String>,
    pub token_logprobs: Option<Vec<Vec<f64>>>,
    pub provider_name: String,
}

impl GenerationResult {
    /// Log-probabilities of the first completion, if supplied.
    pub fn first_logprobs(&self) -> Option<&[f64]> {
        self.token_logprobs
            .as_ref()
            .and_then(|l| l.first())
            .map(Vec::as_slice)
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("no scripted completions for prompt {0:?}")]
    Unscripted(String),
    #[error("prompt {prompt_id:?} has {available} scripted completions but {requested} were requested")]
    InsufficientCompletions {
        prompt_id: String,
        available: usize,
        requested: u32,
    },
    #[error("invalid completion script {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("cannot read completion script {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[cfg(feature = "live-provider")]
    #[error("live backend error: {0}")]
    Backend(String),
}

/// A text-generation backend. Implementations must be safe to call from
/// multiple threads; the pipeline shares one provider across workers.
pub trait CompletionProvider: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, ProviderError>;
    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Deserialize)]
struct ScriptEntry {
    completions: Vec<String>,
    #[serde(default)]
    logprobs: Option<Vec<Vec<f64>>>,
}

/// Deterministic provider that replays completions from a JSON script of the
/// form `{"prompt_id": {"completions": [...], "logprobs": [[...]]}}`.
///
/// Strict: a request for an unscripted prompt id is an error rather than an
/// empty answer, so fixture gaps surface immediately.
pub struct ScriptedProvider {
    entries: HashMap<String, ScriptEntry>,
    name: String,
}

impl ScriptedProvider {
    pub fn from_path(path: impl AsRef<Path>) -> Result<ScriptedProvider, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProviderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| format!("scripted:{}", s.to_string_lossy()))
            .unwrap_or_else(|| "scripted".to_string());
        Self::from_json(&text, &name).map_err(|e| match e {
            ProviderError::Schema { message, .. } => ProviderError::Schema {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str, name: &str) -> Result<ScriptedProvider, ProviderError> {
        let entries: HashMap<String, ScriptEntry> =
            serde_json::from_str(text).map_err(|e| ProviderError::Schema {
                path: PathBuf::new(),
                message: e.to_string(),
            })?;
        for (id, entry) in &entries {
            if entry.completions.is_empty() {
                return Err(ProviderError::Schema {
                    path: PathBuf::new(),
                    message: format!("prompt {id:?} has an empty completions list"),
                });
            }
            if let Some(logprobs) = &entry.logprobs {
                if logprobs.len() != entry.completions.len() {
                    return Err(ProviderError::Schema {
                        path: PathBuf::new(),
                        message: format!(
                            "prompt {id:?}: {} logprob lists for {} completions",
                            logprobs.len(),
                            entry.completions.len()
                        ),
                    });
                }
            }
        }
        Ok(ScriptedProvider {
            entries,
            name: name.to_string(),
        })
    }

    /// Ids this script can answer; used to cross-check fixture coverage.
    pub fn scripted_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl CompletionProvider for ScriptedProvider {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, ProviderError> {
        req.validate()?;
        let entry = self
            .entries
            .get(&req.prompt_id)
            .ok_or_else(|| ProviderError::Unscripted(req.prompt_id.clone()))?;
        let requested = req.k as usize;
        if entry.completions.len() < requested {
            return Err(ProviderError::InsufficientCompletions {
                prompt_id: req.prompt_id.clone(),
                available: entry.completions.len(),
                requested: req.k,
            });
        }
        let completions = entry.completions[..requested].to_vec();
        let token_logprobs = entry
            .logprobs
            .as_ref()
            .map(|l| l[..requested].to_vec());
        Ok(GenerationResult {
            completions,
            token_logprobs,
            provider_name: self.name.clone(),
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}

#[cfg(feature = "live-provider")]
pub use live::LiveProvider;

/// HTTP adapter for chat-completions-style backends.
///
/// Configured entirely from environment variables so no credentials pass
/// through files or flags. Excluded from the evaluation suite; the harness
/// runs offline against the scripted provider.
#[cfg(feature = "live-provider")]
mod live {
    use super::{CompletionProvider, GenerationRequest, GenerationResult, ProviderError};

    pub struct LiveProvider {
        base_url: String,
        model: String,
        api_key: Option<String>,
        client: reqwest::blocking::Client,
    }

    impl LiveProvider {
        /// Reads `CAVEAT_API_BASE` and `CAVEAT_MODEL` (required) and
        /// `CAVEAT_API_KEY` (optional bearer token).
        pub fn from_env() -> Result<LiveProvider, ProviderError> {
            let base_url = std::env::var("CAVEAT_API_BASE")
                .map_err(|_| ProviderError::Backend("CAVEAT_API_BASE is not set".to_string()))?;
            let model = std::env::var("CAVEAT_MODEL")
                .map_err(|_| ProviderError::Backend("CAVEAT_MODEL is not set".to_string()))?;
            Ok(LiveProvider {
                base_url,
                model,
                api_key: std::env::var("CAVEAT_API_KEY").ok(),
                client: reqwest::blocking::Client::new(),
            })
        }
    }

    impl CompletionProvider for LiveProvider {
        fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, ProviderError> {
            req.validate()?;
            let body = serde_json::json!({
                "model": self.model,
                "messages": [{"role": "user", "content": req.prompt_text}],
                "n": req.k,
                "temperature": req.temperature,
            });
            let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
            let mut request = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let response = request
                .send()
                .map_err(|e| ProviderError::Backend(e.to_string()))?
                .error_for_status()
                .map_err(|e| ProviderError::Backend(e.to_string()))?;
            let value: serde_json::Value = response
                .json()
                .map_err(|e| ProviderError::Backend(e.to_string()))?;
            let completions: Vec<String> = value["choices"]
                .as_array()
                .map(|choices| {
                    choices
                        .iter()
                        .filter_map(|c| c["message"]["content"].as_str().map(str::to_string))
                        .collect()
                })
                .unwrap_or_default();
            if completions.len() != req.k as usize {
                return Err(ProviderError::Backend(format!(
                    "backend returned {} completions for k={}",
                    completions.len(),
                    req.k
                )));
            }
            Ok(GenerationResult {
                completions,
                token_logprobs: None,
                provider_name: "live".to_string(),
            })
        }

        fn name(&self) -> &str {
            "live"
        }
    }
}
