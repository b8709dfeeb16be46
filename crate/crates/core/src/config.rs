//! Run configuration and its fingerprint.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::claim::SourceKind;

pub const DEFAULT_MODEL: &str = "gpt-4o-mini-2024-07-18";
pub const DEFAULT_MAX_QUESTIONS: u32 = 5;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const DEFAULT_STEP_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("max_questions must be at least 1")]
    ZeroQuestions,
    #[error("concurrency_limit must be at least 1")]
    ZeroConcurrency,
    #[error("max_tokens must be at least 1")]
    ZeroMaxTokens,
    #[error("temperature must be a finite non-negative number, got {0}")]
    BadTemperature(f64),
    #[error("model name is empty")]
    EmptyModel,
    #[error("step timeout must be at least 1 second")]
    ZeroTimeout,
}

/// The three model roles of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    QuestionGen,
    Summarizer,
    Reasoner,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Role::QuestionGen => "QuestionGen",
            Role::Summarizer => "Summarizer",
            Role::Reasoner => "Reasoner",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question_gen: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summarizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model_name: String,
    pub source_kind: SourceKind,
    pub predicate_mode: bool,
    pub max_questions: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    pub concurrency_limit: usize,
    pub cache_dir: PathBuf,
    pub role_overrides: RoleOverrides,
    /// Directory with replacement few-shot bank files.
    pub prompt_dir: Option<PathBuf>,
    pub step_timeout_secs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_name: DEFAULT_MODEL.to_string(),
            source_kind: SourceKind::Web,
            predicate_mode: false,
            max_questions: DEFAULT_MAX_QUESTIONS,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            concurrency_limit: 4,
            cache_dir: PathBuf::from("cache"),
            role_overrides: RoleOverrides::default(),
            prompt_dir: None,
            step_timeout_secs: DEFAULT_STEP_TIMEOUT_SECS,
        }
    }
}

/// The subset of fields that change what a run computes. Cache location and
/// parallelism are excluded so that they never invalidate cached evidence.
#[derive(Serialize)]
struct FingerprintView<'a> {
    schema: &'static str,
    model_name: &'a str,
    source_kind: SourceKind,
    predicate_mode: bool,
    max_questions: u32,
    temperature: f64,
    max_tokens: u32,
    role_overrides: &'a RoleOverrides,
    prompt_dir: Option<&'a PathBuf>,
    step_timeout_secs: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_questions == 0 {
            return Err(ConfigError::ZeroQuestions);
        }
        if self.concurrency_limit == 0 {
            return Err(ConfigError::ZeroConcurrency);
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::ZeroMaxTokens);
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConfigError::BadTemperature(self.temperature));
        }
        if self.model_name.trim().is_empty() {
            return Err(ConfigError::EmptyModel);
        }
        if self.step_timeout_secs == 0 {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }

    /// Model used for a role, falling back to `model_name`.
    pub fn model_for(&self, role: Role) -> &str {
        let o = &self.role_overrides;
        let chosen = match role {
            Role::QuestionGen => o.question_gen.as_deref(),
            Role::Summarizer => o.summarizer.as_deref(),
            Role::Reasoner => o.reasoner.as_deref(),
        };
        chosen.unwrap_or(&self.model_name)
    }

    /// Hex SHA-256 over the semantically relevant fields.
    pub fn fingerprint(&self) -> String {
        let view = FingerprintView {
            schema: "stepcheck-config/1",
            model_name: &self.model_name,
            source_kind: self.source_kind,
            predicate_mode: self.predicate_mode,
            max_questions: self.max_questions,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            role_overrides: &self.role_overrides,
            prompt_dir: self.prompt_dir.as_ref(),
            step_timeout_secs: self.step_timeout_secs,
        };
        let canonical = serde_json::to_vec(&view).expect("config view serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// Free-function form of [`RunConfig::fingerprint`].
pub fn fingerprint(config: &RunConfig) -> String {
    config.fingerprint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let c = RunConfig::default();
        assert_eq!(c.max_questions, 5);
        assert_eq!(c.temperature, 0.0);
        assert_eq!(c.max_tokens, 512);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn fingerprint_is_deterministic() {
        let c = RunConfig::default();
        assert_eq!(fingerprint(&c), fingerprint(&c.clone()));
    }

    #[test]
    fn fingerprint_sensitive_to_fields() {
        let base = RunConfig::default();
        let mut four = base.clone();
        four.max_questions = 4;
        assert_ne!(base.fingerprint(), four.fingerprint());

        let mut pred = base.clone();
        pred.predicate_mode = true;
        let mut internal = base.clone();
        internal.source_kind = SourceKind::Internal;
        let mut reasoner = base.clone();
        reasoner.role_overrides.reasoner = Some("other".into());
        let mut temp = base.clone();
        temp.temperature = 0.7;
        let prints: std::collections::HashSet<_> = [&base, &pred, &internal, &reasoner, &temp]
            .iter()
            .map(|c| c.fingerprint())
            .collect();
        assert_eq!(prints.len(), 5);
    }

    #[test]
    fn fingerprint_ignores_cache_location_and_parallelism() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.cache_dir = "/tmp/elsewhere".into();
        other.concurrency_limit = 16;
        assert_eq!(base.fingerprint(), other.fingerprint());
    }

    #[test]
    fn validate_rejects_zero_questions() {
        let mut c = RunConfig {
            max_questions: 0,
            ..RunConfig::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::ZeroQuestions));
        c.max_questions = 1;
        c.temperature = f64::NAN;
        assert!(matches!(c.validate(), Err(ConfigError::BadTemperature(_))));
    }

    #[test]
    fn role_overrides_fall_back() {
        let mut c = RunConfig::default();
        c.role_overrides.summarizer = Some("small".into());
        assert_eq!(c.model_for(Role::Summarizer), "small");
        assert_eq!(c.model_for(Role::Reasoner), DEFAULT_MODEL);
    }
}
