//! Claims, verdicts and the per-step records that make up a verification trace.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::Predicate;

/// Answer recorded for a question whose retrieval produced nothing usable.
pub const NO_EVIDENCE_ANSWER: &str = "No evidence found.";

/// Maximum rank a web snippet may carry.
pub const MAX_WEB_SNIPPETS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClaimError {
    #[error("claim text is empty")]
    EmptyText,
    #[error("claim id is empty")]
    EmptyId,
    #[error("snippet rank must be at least 1")]
    ZeroRank,
    #[error("web snippet rank {0} exceeds {max}", max = MAX_WEB_SNIPPETS)]
    WebRankTooHigh(u32),
    #[error("unknown verdict label {0:?}")]
    UnknownVerdict(String),
    #[error("unknown source kind {0:?}")]
    UnknownSource(String),
}

/// A natural-language statement under verification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawClaim")]
pub struct Claim {
    text: String,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<String>,
}

#[derive(Deserialize)]
struct RawClaim {
    text: String,
    id: String,
    #[serde(default)]
    origin: Option<String>,
}

impl TryFrom<RawClaim> for Claim {
    type Error = ClaimError;

    fn try_from(raw: RawClaim) -> Result<Self, Self::Error> {
        let claim = Claim::new(raw.id, raw.text)?;
        Ok(match raw.origin {
            Some(origin) => claim.with_origin(origin),
            None => claim,
        })
    }
}

impl Claim {
    /// The text is stored verbatim; only emptiness is checked after trimming.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, ClaimError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ClaimError::EmptyText);
        }
        if id.trim().is_empty() {
            return Err(ClaimError::EmptyId);
        }
        Ok(Self {
            text,
            id,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }
}

/// Binary veracity label. There is deliberately no third state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Supported,
    Refuted,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Supported => "SUPPORTED",
            Verdict::Refuted => "REFUTED",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Verdict {
    type Err = ClaimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "supported" => Ok(Verdict::Supported),
            "refuted" => Ok(Verdict::Refuted),
            _ => Err(ClaimError::UnknownVerdict(s.to_string())),
        }
    }
}

/// Outcome of asking the verifier whether the gathered evidence suffices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerifierDecision {
    Enough,
    NotEnough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    #[serde(alias = "web")]
    Web,
    #[serde(alias = "internal")]
    Internal,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Web => "web",
            SourceKind::Internal => "internal",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = ClaimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "web" => Ok(SourceKind::Web),
            "internal" => Ok(SourceKind::Internal),
            _ => Err(ClaimError::UnknownSource(s.to_string())),
        }
    }
}

/// One piece of evidence attached to a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub text: String,
    pub source_kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_ref: Option<String>,
    pub rank: u32,
}

impl EvidenceSnippet {
    pub fn web(text: impl Into<String>, url: impl Into<String>, rank: u32) -> Result<Self, ClaimError> {
        let snippet = Self {
            text: text.into(),
            source_kind: SourceKind::Web,
            source_ref: Some(url.into()),
            rank,
        };
        snippet.validate()?;
        Ok(snippet)
    }

    pub fn internal(text: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source_kind: SourceKind::Internal,
            source_ref: Some(model.into()),
            rank: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ClaimError> {
        if self.rank == 0 {
            return Err(ClaimError::ZeroRank);
        }
        if self.source_kind == SourceKind::Web && self.rank as usize > MAX_WEB_SNIPPETS {
            return Err(ClaimError::WebRankTooHigh(self.rank));
        }
        Ok(())
    }
}

/// One question/answer iteration of the verification loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaStep {
    pub index: u32,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
    pub snippets: Vec<EvidenceSnippet>,
    pub answer: String,
    pub no_evidence: bool,
    /// Verifier outcome after this step, when the verifier was consulted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<VerifierDecision>,
}

impl QaStep {
    /// The answer as it should appear in prompts.
    pub fn rendered_answer(&self) -> &str {
        if self.no_evidence {
            NO_EVIDENCE_ANSWER
        } else {
            &self.answer
        }
    }
}
