//! Chat-completion access for the three model roles.
//!
//! A [`Gateway`] validates requests, resolves the model for the request's
//! role and retries transient backend failures. Backends implement
//! [`ChatBackend`]: [`HttpChatBackend`] speaks the common chat-completions
//! HTTP shape, [`ScriptedBackend`] replays canned answers for hermetic runs.

mod http;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpChatBackend;
pub use scripted::{ScriptBook, ScriptedBackend};

use crate::config::{Role, RunConfig};
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: Role,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// One user message carrying a whole rendered prompt, decoding
    /// parameters taken from the config.
    pub fn prompt(role: Role, text: impl Into<String>, config: &RunConfig) -> Self {
        Self {
            role,
            messages: vec![ChatMessage {
                speaker: Speaker::User,
                text: text.into(),
            }],
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.messages.last() {
            None => Err("message list is empty".into()),
            Some(m) if m.speaker != Speaker::User => Err("last message must come from the user".into()),
            Some(_) => Ok(()),
        }
    }

    /// Text of the final user message.
    pub fn last_text(&self) -> &str {
        self.messages.last().map(|m| m.text.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

/// Failure reported by a single backend call.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Rate limits, 5xx responses, timeouts and connection failures.
    #[error("transient: {0}")]
    Transient(String),
    #[error("credentials rejected: {0}")]
    Auth(String),
    #[error("script exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("invalid {role} request: {reason}")]
    InvalidRequest { role: Role, reason: String },
    #[error("{role} backend unavailable after {attempts} attempts: {reason}")]
    BackendUnavailable { role: Role, attempts: u32, reason: String },
    #[error("{role} credentials rejected after {attempts} attempts: {reason}")]
    AuthError { role: Role, attempts: u32, reason: String },
    #[error("{role} script exhausted after {calls} calls")]
    ScriptExhausted { role: Role, calls: usize },
    #[error("{role} backend failed after {attempts} attempts: {reason}")]
    Backend { role: Role, attempts: u32, reason: String },
    #[error("backend configuration: {0}")]
    Setup(String),
}

pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest, model: &str) -> Result<Completion, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn send(&self, request: &ChatRequest, model: &str) -> Result<Completion, BackendError> {
        (**self).send(request, model)
    }
}

#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn backend(&self) -> &Arc<dyn ChatBackend> {
        &self.backend
    }

    /// Sends `request` to the model configured for its role. Transient
    /// failures are retried with the same request; empty text is returned
    /// as-is.
    pub fn complete(&self, request: &ChatRequest, config: &RunConfig) -> Result<Completion, GatewayError> {
        let role = request.role;
        request
            .validate()
            .map_err(|reason| GatewayError::InvalidRequest { role, reason })?;
        let model = config.model_for(role);

        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.backend.send(request, model) {
                Ok(completion) => return Ok(completion),
                Err(BackendError::Transient(reason)) => {
                    if attempts >= self.retry.max_attempts() {
                        return Err(GatewayError::BackendUnavailable { role, attempts, reason });
                    }
                    log::warn!("{role} call failed ({reason}), retry {attempts}");
                    self.retry.wait(attempts - 1);
                }
                Err(BackendError::Auth(reason)) => {
                    return Err(GatewayError::AuthError { role, attempts, reason })
                }
                Err(BackendError::ScriptExhausted { calls }) => {
                    return Err(GatewayError::ScriptExhausted { role, calls })
                }
                Err(BackendError::Fatal(reason)) => {
                    return Err(GatewayError::Backend { role, attempts, reason })
                }
            }
        }
    }
}
