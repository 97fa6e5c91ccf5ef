//! TOML run configuration.
//!
//! A config file fully describes a run: corpus paths, pipeline settings,
//! retriever parameters, backend, and output locations. CLI flags override
//! individual fields. Auth tokens are never stored in the file; `auth_env`
//! names an environment variable holding the token.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CondensationMode;
use crate::llm::{ApiShape, Backend, HttpBackend, MockBackend, MockRule, RetryPolicy};
use crate::pipeline::{
    AnswerSource, EndToEndStyle, EvidenceSource, PipelineError, QuestionSource, RewriteInputConfig, RunMode,
    RunSettings,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub retriever: RetrieverSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub documents: Option<PathBuf>,
    pub snippets: Option<PathBuf>,
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// "qadecontext" or "end_to_end".
    pub mode: String,
    /// "retrieve", "full_doc", or "gold".
    pub qa_mode: String,
    /// "tsp", "tasp", "taisp", or "full".
    pub condensation: String,
    pub token_budget: usize,
    /// Subset of "DQAE".
    pub rewrite_inputs: String,
    /// "generated" or "gold".
    pub question_source: String,
    /// "generated" or "gold".
    pub answer_source: String,
    pub question_cap: usize,
    pub tolerance: usize,
    /// "single" or "chat".
    pub e2e_style: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: "qadecontext".to_string(),
            qa_mode: "retrieve".to_string(),
            condensation: "tasp".to_string(),
            token_budget: 3000,
            rewrite_inputs: "DQAE".to_string(),
            question_source: "generated".to_string(),
            answer_source: "generated".to_string(),
            question_cap: 3,
            tolerance: crate::edits::DEFAULT_TOLERANCE,
            e2e_style: "single".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RetrieverSection {
    pub k: usize,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrieverSection {
    fn default() -> Self {
        RetrieverSection {
            k: crate::retrieval::DEFAULT_K,
            k1: crate::retrieval::DEFAULT_K1,
            b: crate::retrieval::DEFAULT_B,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    /// "mock" or "http".
    pub kind: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Environment variable naming the bearer token; the token itself is
    /// never written to disk.
    pub auth_env: Option<String>,
    /// "chat" or "completion".
    pub shape: String,
    pub retry_limit: usize,
    pub retry_base_ms: u64,
    pub timeout_ms: u64,
    pub concurrency: usize,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub mock_rules: Vec<MockRule>,
    pub mock_fallback: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: "mock".to_string(),
            endpoint: None,
            model: None,
            auth_env: None,
            shape: "chat".to_string(),
            retry_limit: 3,
            retry_base_ms: 500,
            timeout_ms: 60_000,
            concurrency: 4,
            max_output_tokens: 512,
            mock_rules: Vec::new(),
            mock_fallback: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Directory of template overrides (same file names as the built-ins).
    pub template_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let display = path.display().to_string();
        let body = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: display.clone(),
            source,
        })?;
        toml::from_str(&body).map_err(|source| ConfigError::Parse { path: display, source })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig serializes")
    }

    pub fn settings(&self) -> Result<RunSettings, ConfigError> {
        let mode = match self.run.mode.as_str() {
            "qadecontext" => RunMode::Qadecontext,
            "end_to_end" => RunMode::EndToEnd,
            other => return Err(ConfigError::Invalid(format!("unknown mode {other:?}"))),
        };
        let evidence_source = match self.run.qa_mode.as_str() {
            "retrieve" => EvidenceSource::Retrieve,
            "full_doc" => EvidenceSource::FullDoc,
            "gold" => EvidenceSource::Gold,
            other => return Err(ConfigError::Invalid(format!("unknown qa_mode {other:?}"))),
        };
        let question_source = match self.run.question_source.as_str() {
            "generated" => QuestionSource::Generated,
            "gold" => QuestionSource::Gold,
            other => return Err(ConfigError::Invalid(format!("unknown question_source {other:?}"))),
        };
        let answer_source = match self.run.answer_source.as_str() {
            "generated" => AnswerSource::Generated,
            "gold" => AnswerSource::Gold,
            other => return Err(ConfigError::Invalid(format!("unknown answer_source {other:?}"))),
        };
        let end_to_end_style = match self.run.e2e_style.as_str() {
            "single" => EndToEndStyle::Single,
            "chat" => EndToEndStyle::Chat,
            other => return Err(ConfigError::Invalid(format!("unknown e2e_style {other:?}"))),
        };
        let condensation = CondensationMode::from_str(&self.run.condensation)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.run.token_budget == 0 {
            return Err(ConfigError::Invalid("token_budget must be positive".to_string()));
        }
        let settings = RunSettings {
            mode,
            question_source,
            evidence_source,
            answer_source,
            rewrite_inputs: RewriteInputConfig::parse(&self.run.rewrite_inputs)?,
            condensation,
            token_budget: self.run.token_budget,
            question_cap: self.run.question_cap,
            k: self.retriever.k,
            k1: self.retriever.k1,
            b: self.retriever.b,
            tolerance: self.run.tolerance,
            max_output_tokens: self.backend.max_output_tokens,
            end_to_end_style,
            backend_id: self.backend_id(),
        };
        settings.validate()?;
        Ok(settings)
    }

    /// Stable identifier hashed into cache keys; distinguishes backends so
    /// switching models never reuses stale completions.
    pub fn backend_id(&self) -> String {
        match self.backend.kind.as_str() {
            "http" => format!(
                "http:{}:{}",
                self.backend.endpoint.as_deref().unwrap_or(""),
                self.backend.model.as_deref().unwrap_or("")
            ),
            _ => "mock".to_string(),
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn Backend>, ConfigError> {
        match self.backend.kind.as_str() {
            "mock" => Ok(Box::new(MockBackend::new(
                self.backend.mock_rules.clone(),
                self.backend.mock_fallback.clone(),
            ))),
            "http" => {
                let endpoint = self
                    .backend
                    .endpoint
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("http backend requires endpoint".to_string()))?;
                let model = self
                    .backend
                    .model
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("http backend requires model".to_string()))?;
                let shape = match self.backend.shape.as_str() {
                    "chat" => ApiShape::Chat,
                    "completion" => ApiShape::Completion,
                    other => return Err(ConfigError::Invalid(format!("unknown shape {other:?}"))),
                };
                let auth_token = match &self.backend.auth_env {
                    Some(var) => std::env::var(var).ok(),
                    None => None,
                };
                Ok(Box::new(HttpBackend::new(
                    endpoint,
                    model,
                    shape,
                    auth_token,
                    Duration::from_millis(self.backend.timeout_ms),
                )))
            }
            other => Err(ConfigError::Invalid(format!("unknown backend kind {other:?}"))),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.backend.retry_limit.max(1),
            base_delay: Duration::from_millis(self.backend.retry_base_ms),
        }
    }
}
