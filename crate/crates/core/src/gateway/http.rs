use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest, Completion, GatewayError, Speaker, TokenUsage};

pub const API_KEY_ENV: &str = "STEPCHECK_API_KEY";
pub const API_BASE_ENV: &str = "STEPCHECK_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// Client for any endpoint accepting `POST {base}/chat/completions` with
/// the usual `{model, messages, temperature, max_tokens}` body.
pub struct HttpChatBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            agent,
        }
    }

    /// Reads `STEPCHECK_API_BASE` and `STEPCHECK_API_KEY`. A key is required
    /// unless the base URL points somewhere other than the default service.
    pub fn from_env(timeout: Duration) -> Result<Self, GatewayError> {
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        if key.is_none() && base.trim_end_matches('/') == DEFAULT_API_BASE {
            return Err(GatewayError::Setup(format!("{API_KEY_ENV} is not set")));
        }
        Ok(Self::new(&base, key, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Exact bytes sent for a request. Deterministic, so a retry re-sends
    /// the same body.
    pub fn wire_body(request: &ChatRequest, model: &str) -> Vec<u8> {
        let body = WireRequest {
            model,
            messages: request
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.speaker {
                        Speaker::System => "system",
                        Speaker::User => "user",
                        Speaker::Assistant => "assistant",
                    },
                    content: &m.text,
                })
                .collect(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        serde_json::to_vec(&body).expect("request body serializes")
    }

    /// Decodes a chat-completions response body, taking the first choice.
    pub fn parse_response(body: &str, requested_model: &str) -> Result<Completion, BackendError> {
        let wire: WireResponse =
            serde_json::from_str(body).map_err(|e| BackendError::Fatal(format!("malformed response: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
        Ok(Completion {
            text: choice.message.content.unwrap_or_default(),
            model_name: wire.model.unwrap_or_else(|| requested_model.to_string()),
            token_usage: wire.usage.map(|u| TokenUsage {
                prompt: u.prompt_tokens,
                completion: u.completion_tokens,
            }),
        })
    }
}

pub(crate) fn classify_status(status: u16, body: &str) -> Option<BackendError> {
    let snippet: String = body.chars().take(200).collect();
    match status {
        200..=299 => None,
        401 | 403 => Some(BackendError::Auth(format!("HTTP {status}: {snippet}"))),
        408 | 429 | 500..=599 => Some(BackendError::Transient(format!("HTTP {status}"))),
        _ => Some(BackendError::Fatal(format!("HTTP {status}: {snippet}"))),
    }
}

pub(crate) fn classify_transport(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
            BackendError::Transient(err.to_string())
        }
        other => BackendError::Fatal(other.to_string()),
    }
}

impl ChatBackend for HttpChatBackend {
    fn send(&self, request: &ChatRequest, model: &str) -> Result<Completion, BackendError> {
        let body = Self::wire_body(request, model);
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send(&body[..]).map_err(classify_transport)?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(classify_transport)?;
        if let Some(err) = classify_status(status, &text) {
            return Err(err);
        }
        Self::parse_response(&text, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Role, RunConfig};

    #[test]
    fn default_body_has_protocol_decoding_parameters() {
        let req = ChatRequest::prompt(Role::QuestionGen, "Claim = x", &RunConfig::default());
        let body: serde_json::Value = serde_json::from_slice(&HttpChatBackend::wire_body(&req, "m")).unwrap();
        assert_eq!(body["temperature"], serde_json::json!(0.0));
        assert_eq!(body["max_tokens"], serde_json::json!(512));
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "Claim = x");
    }

    #[test]
    fn status_classification() {
        assert!(classify_status(200, "").is_none());
        assert!(matches!(classify_status(429, ""), Some(BackendError::Transient(_))));
        assert!(matches!(classify_status(503, ""), Some(BackendError::Transient(_))));
        assert!(matches!(classify_status(401, ""), Some(BackendError::Auth(_))));
        assert!(matches!(classify_status(400, ""), Some(BackendError::Fatal(_))));
    }

    #[test]
    fn null_content_is_empty_text() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":null}}]}"#;
        let c = HttpChatBackend::parse_response(body, "m").unwrap();
        assert_eq!(c.text, "");
        assert_eq!(c.model_name, "m");
    }
}
