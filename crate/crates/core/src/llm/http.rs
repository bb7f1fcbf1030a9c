use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendMeta, ChatBackend, ChatRequest, ChatResponse};

pub const CHAT_COMPLETIONS_PATH: &str = "/v1/chat/completions";
pub const API_KEY_ENV: &str = "LLM4RERANK_API_KEY";
pub const ENDPOINT_ENV: &str = "LLM4RERANK_ENDPOINT";

/// Exponential backoff for transient failures: retry `n` waits
/// `initial_backoff_ms * 2^(n-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(1 << retry.saturating_sub(1).min(16)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Server root, e.g. `http://localhost:8000`.
    pub endpoint: String,
    pub path: String,
    /// Falls back to `LLM4RERANK_API_KEY` when unset.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000".to_string(),
            path: CHAT_COMPLETIONS_PATH.to_string(),
            api_key: None,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl HttpConfig {
    /// Overlays `LLM4RERANK_ENDPOINT` and `LLM4RERANK_API_KEY` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.endpoint = endpoint;
            }
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
        self
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with(self.path.trim_end_matches('/')) {
            base.to_string()
        } else {
            format!("{base}{}", self.path)
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

enum Attempt {
    Done(ChatResponse),
    Retry(String),
    Fatal(BackendError),
}

/// OpenAI-compatible chat-completions client.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, url: &str, request: &ChatRequest) -> Attempt {
        let started = Instant::now();
        let mut call = self.agent.post(url);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match call.send_json(request) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let body = match response.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            401 | 403 => return Attempt::Fatal(BackendError::Auth(status)),
            408 | 429 | 500..=599 => return Attempt::Retry(format!("HTTP {status}")),
            200..=299 => {}
            _ => {
                return Attempt::Fatal(BackendError::Protocol(format!(
                    "unexpected HTTP {status}: {}",
                    body.chars().take(200).collect::<String>()
                )))
            }
        }
        let wire: WireResponse = match serde_json::from_str(&body) {
            Ok(w) => w,
            Err(e) => return Attempt::Fatal(BackendError::Protocol(e.to_string())),
        };
        let Some(choice) = wire.choices.into_iter().next() else {
            return Attempt::Fatal(BackendError::Protocol("response has no choices".into()));
        };
        Attempt::Done(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            backend_meta: Some(BackendMeta {
                latency_ms: started.elapsed().as_millis() as u64,
                prompt_tokens: wire.usage.as_ref().and_then(|u| u.prompt_tokens),
                completion_tokens: wire.usage.as_ref().and_then(|u| u.completion_tokens),
            }),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let url = self.config.url();
        let mut retry = 0;
        loop {
            match self.attempt(&url, request) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(message) => {
                    if retry >= self.config.retry.max_retries {
                        return Err(BackendError::Transport {
                            attempts: retry + 1,
                            message,
                        });
                    }
                    retry += 1;
                    log::warn!("LLM call failed ({message}); retry {retry} of {}", self.config.retry.max_retries);
                    std::thread::sleep(self.config.retry.backoff(retry));
                }
            }
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}
