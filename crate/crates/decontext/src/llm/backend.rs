//! Completion backends: a remote HTTP backend and a scripted mock.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Prompt {
    Single { text: String },
    Chat { system: String, user: String },
}

impl Prompt {
    pub fn single(text: impl Into<String>) -> Prompt {
        Prompt::Single { text: text.into() }
    }

    /// The text a substring matcher scans; chat prompts concatenate both roles.
    pub fn matchable_text(&self) -> String {
        match self {
            Prompt::Single { text } => text.clone(),
            Prompt::Chat { system, user } => format!("{system}\n{user}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompletionRequest {
    pub backend_id: String,
    pub prompt: Prompt,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    pub fn new(backend_id: impl Into<String>, prompt: Prompt) -> CompletionRequest {
        CompletionRequest {
            backend_id: backend_id.into(),
            prompt,
            max_output_tokens: 512,
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackendReply {
    pub text: String,
    pub raw: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transient backend failure (status {status:?}): {message}")]
    Transient { status: Option<u16>, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transient { .. })
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendError>;
}

/// JSON request/response shape of the remote endpoint.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApiShape {
    /// `messages` list in, `choices[0].message.content` out.
    #[default]
    Chat,
    /// `prompt` string in, `choices[0].text` out.
    Completion,
}

pub struct HttpBackend {
    pub endpoint: String,
    pub model: String,
    pub shape: ApiShape,
    pub auth_token: Option<String>,
    pub timeout: Duration,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: String, model: String, shape: ApiShape, auth_token: Option<String>, timeout: Duration) -> HttpBackend {
        HttpBackend {
            endpoint,
            model,
            shape,
            auth_token,
            timeout,
            client: reqwest::blocking::Client::new(),
        }
    }

    fn body(&self, request: &CompletionRequest) -> serde_json::Value {
        let mut body = match (&self.shape, &request.prompt) {
            (ApiShape::Chat, prompt) => {
                let messages = match prompt {
                    Prompt::Single { text } => json!([{ "role": "user", "content": text }]),
                    Prompt::Chat { system, user } => json!([
                        { "role": "system", "content": system },
                        { "role": "user", "content": user },
                    ]),
                };
                json!({ "model": self.model, "messages": messages })
            }
            (ApiShape::Completion, prompt) => {
                json!({ "model": self.model, "prompt": prompt.matchable_text() })
            }
        };
        body["max_tokens"] = json!(request.max_output_tokens);
        body["temperature"] = json!(request.temperature);
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        body
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let mut http = self
            .client
            .post(&self.endpoint)
            .timeout(self.timeout)
            .json(&self.body(request));
        if let Some(token) = &self.auth_token {
            http = http.bearer_auth(token);
        }
        let response = http.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                BackendError::Transient { status: None, message: e.to_string() }
            } else {
                BackendError::Fatal(e.to_string())
            }
        })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("status {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient {
                status: Some(status.as_u16()),
                message: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("status {status}")));
        }
        let raw: serde_json::Value = response
            .json()
            .map_err(|e| BackendError::Fatal(format!("invalid response body: {e}")))?;
        let text = match self.shape {
            ApiShape::Chat => raw["choices"][0]["message"]["content"].as_str(),
            ApiShape::Completion => raw["choices"][0]["text"].as_str(),
        }
        .ok_or_else(|| BackendError::Fatal("response missing completion text".to_string()))?
        .to_string();
        Ok(BackendReply { text, raw })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "match")]
pub enum Matcher {
    Substring { substring: String },
    Exact { prompt: String },
}

impl Matcher {
    fn matches(&self, prompt_text: &str) -> bool {
        match self {
            Matcher::Substring { substring } => prompt_text.contains(substring.as_str()),
            Matcher::Exact { prompt } => prompt_text == prompt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MockRule {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub response: String,
}

/// Deterministic scripted backend. Answers with the first matching rule,
/// records every prompt, and can be scripted to fail the first N calls with
/// a transient error (for retry tests).
pub struct MockBackend {
    pub rules: Vec<MockRule>,
    pub fallback: Option<String>,
    fail_first: AtomicUsize,
    calls: Mutex<Vec<String>>,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>, fallback: Option<String>) -> MockBackend {
        MockBackend {
            rules,
            fallback,
            fail_first: AtomicUsize::new(0),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn echo() -> MockBackend {
        MockBackend::new(Vec::new(), None)
    }

    pub fn fail_first(self, n: usize) -> MockBackend {
        self.fail_first.store(n, Ordering::SeqCst);
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let text = request.prompt.matchable_text();
        self.calls.lock().unwrap().push(text.clone());
        let remaining = self.fail_first.load(Ordering::SeqCst);
        if remaining > 0 {
            self.fail_first.store(remaining - 1, Ordering::SeqCst);
            return Err(BackendError::Transient {
                status: Some(503),
                message: "scripted failure".to_string(),
            });
        }
        for rule in &self.rules {
            if rule.matcher.matches(&text) {
                return Ok(BackendReply {
                    text: rule.response.clone(),
                    raw: json!({ "mock": true }),
                });
            }
        }
        match &self.fallback {
            Some(fallback) => Ok(BackendReply {
                text: fallback.clone(),
                raw: json!({ "mock": true, "fallback": true }),
            }),
            None => Err(BackendError::Fatal("no mock rule matched the prompt".to_string())),
        }
    }
}
