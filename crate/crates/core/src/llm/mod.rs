//! Backend-agnostic chat-completion interface.
//!
//! [`ChatBackend`] is the one seam between the reranking loop and a language
//! model. [`HttpBackend`] speaks the OpenAI-compatible chat-completions wire
//! format; [`MockBackend`] replays scripts or applies simple rules so the
//! whole pipeline runs offline and deterministically.

mod http;
mod marker;
mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, RetryPolicy, API_KEY_ENV, CHAT_COMPLETIONS_PATH, ENDPOINT_ENV};
pub use marker::{embed_marker, extract_marker};
pub use mock::{MockBackend, MockBehavior, NextRule, RankingRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Model parameters attached to every node call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            model: "llama-2-13b-chat".to_string(),
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

/// Serialized verbatim as the request body: exactly these four fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(params: &GenerationParams, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: params.model.clone(),
            messages,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Concatenated user-message text, which is where the rendered template lives.
    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendMeta {
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub backend_meta: Option<BackendMeta>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            backend_meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("scripted mock exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid mock behavior: {0}")]
    InvalidBehavior(String),
}

/// A chat-completion service. One handle may serve concurrent requests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    fn name(&self) -> &str;

    /// True when replies depend on call order (a script cursor); callers
    /// must then issue requests sequentially to stay reproducible.
    fn order_sensitive(&self) -> bool {
        false
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }

    fn order_sensitive(&self) -> bool {
        (**self).order_sensitive()
    }
}
