//! Text-completion abstraction: templates, backends, caching, retries.

pub mod backend;
pub mod cache;
pub mod template;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use backend::{ApiShape, Backend, BackendError, BackendReply, CompletionRequest, HttpBackend, Matcher, MockBackend, MockRule, Prompt};
pub use cache::{cache_key, CacheEntry, CacheError, CompletionCache};
pub use template::{bindings, Bindings, PromptTemplate, TemplateError};

/// Prompt bodies shipped with the crate. Users can override them through the
/// run configuration's template directory.
pub mod templates {
    pub const QUESTION_GEN: &str = include_str!("../../templates/question_gen.txt");
    pub const QUESTION_ANSWER: &str = include_str!("../../templates/question_answer.txt");
    pub const REWRITE: &str = include_str!("../../templates/rewrite.txt");
    pub const END_TO_END_SYSTEM: &str = include_str!("../../templates/end_to_end_system.txt");
    pub const END_TO_END_USER: &str = include_str!("../../templates/end_to_end_user.txt");
    pub const END_TO_END_SINGLE: &str = include_str!("../../templates/end_to_end_single.txt");
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend error after {attempts} attempt(s): {source}")]
    Exhausted {
        attempts: usize,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub text: String,
    pub cached: bool,
    pub latency: Duration,
    pub raw: serde_json::Value,
}

/// Backend plus cache plus retry policy. Cache hits return the stored text
/// without touching the backend; misses call the backend with exponential
/// backoff on transient failures, then store the result.
pub struct LlmClient<'a> {
    pub backend: &'a dyn Backend,
    pub cache: Option<&'a CompletionCache>,
    pub retry: RetryPolicy,
}

impl<'a> LlmClient<'a> {
    pub fn new(backend: &'a dyn Backend) -> LlmClient<'a> {
        LlmClient {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_cache(mut self, cache: &'a CompletionCache) -> LlmClient<'a> {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> LlmClient<'a> {
        self.retry = retry;
        self
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let start = Instant::now();
        let key = cache_key(request);
        if let Some(cache) = self.cache {
            if let Some(entry) = cache.load(&key)? {
                return Ok(CompletionResult {
                    text: entry.response,
                    cached: true,
                    latency: start.elapsed(),
                    raw: entry.raw,
                });
            }
        }

        let mut attempt = 0usize;
        let reply = loop {
            attempt += 1;
            match self.backend.complete(request) {
                Ok(reply) => break reply,
                Err(err) if err.is_retryable() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.base_delay * 2u32.saturating_pow(attempt as u32 - 1);
                    std::thread::sleep(delay);
                }
                Err(err) => {
                    return Err(LlmError::Exhausted {
                        attempts: attempt,
                        source: err,
                    })
                }
            }
        };

        if let Some(cache) = self.cache {
            cache.store(
                &key,
                &CacheEntry {
                    request: request.clone(),
                    response: reply.text.clone(),
                    raw: reply.raw.clone(),
                    timestamp: cache::now_unix(),
                },
            )?;
        }
        Ok(CompletionResult {
            text: reply.text,
            cached: false,
            latency: start.elapsed(),
            raw: reply.raw,
        })
    }
}
