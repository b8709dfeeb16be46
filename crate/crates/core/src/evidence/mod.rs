//! Evidence retrieval for a question: web search snippets or the model's
//! own answer, with a persistent cache keyed by question, source and config.

mod cache;
mod search;

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, EvidenceCache, CACHE_DIR_ENV};
pub use search::{DuckDuckGoHtml, FixtureSearch, OfflineSearch, SearxJson};

use crate::claim::{EvidenceSnippet, SourceKind, MAX_WEB_SNIPPETS};
use crate::config::{Role, RunConfig};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::retry::RetryPolicy;

/// Snippet text is cut to this many characters.
pub const MAX_SNIPPET_CHARS: usize = 1200;

const INTERNAL_ANSWER_INSTRUCTION: &str = "Answer the following question in one or two sentences.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultPage {
    pub query: String,
    /// In engine rank order.
    pub results: Vec<SearchResult>,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("transient search failure: {0}")]
    Transient(String),
    #[error("search failed: {0}")]
    Fatal(String),
}

/// Anything that turns a query into ranked (title, url, snippet) results.
pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<SearchResultPage, SearchError>;
}

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("search unavailable after {attempts} attempts: {reason}")]
    SearchUnavailable { attempts: u32, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("evidence cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// Lowercased, whitespace-collapsed form used for keys and lookups.
pub fn normalize_question(question: &str) -> String {
    question
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Hex SHA-256 over the normalized question, source kind and config
/// fingerprint.
pub fn cache_key(question: &str, source: SourceKind, config_fingerprint: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"stepcheck-evidence/1\0");
    hasher.update(source.as_str().as_bytes());
    hasher.update(b"\0");
    hasher.update(config_fingerprint.as_bytes());
    hasher.update(b"\0");
    hasher.update(normalize_question(question).as_bytes());
    hex::encode(hasher.finalize())
}

fn truncate_chars(text: &str, max: usize) -> String {
    match text.char_indices().nth(max) {
        Some((cut, _)) => text[..cut].to_string(),
        None => text.to_string(),
    }
}

/// First five results as ranked snippets.
pub fn snippets_from_page(page: &SearchResultPage) -> Vec<EvidenceSnippet> {
    page.results
        .iter()
        .take(MAX_WEB_SNIPPETS)
        .enumerate()
        .map(|(i, r)| EvidenceSnippet {
            text: truncate_chars(r.snippet.trim(), MAX_SNIPPET_CHARS),
            source_kind: SourceKind::Web,
            source_ref: Some(r.url.clone()),
            rank: i as u32 + 1,
        })
        .collect()
}

#[derive(Clone)]
pub struct Retriever {
    search: Arc<dyn SearchProvider>,
    cache: Option<EvidenceCache>,
    retry: RetryPolicy,
}

impl Retriever {
    pub fn new(search: Arc<dyn SearchProvider>, cache: Option<EvidenceCache>) -> Self {
        Self {
            search,
            cache,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> Option<&EvidenceCache> {
        self.cache.as_ref()
    }

    /// Evidence for `question` from `source`, served from the cache when
    /// present. Web results are capped at five snippets; internal knowledge
    /// yields at most one snippet holding the model's direct answer.
    pub fn retrieve(
        &self,
        question: &str,
        source: SourceKind,
        config: &RunConfig,
        config_fingerprint: &str,
        gateway: &Gateway,
    ) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
        if question.trim().is_empty() {
            return Err(EvidenceError::EmptyQuestion);
        }
        let key = cache_key(question, source, config_fingerprint);
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                log::debug!("evidence cache hit for {question:?}");
                return Ok(entry.snippets);
            }
        }

        let (snippets, page) = match source {
            SourceKind::Web => {
                let page = self.search_with_retry(question)?;
                (snippets_from_page(&page), Some(page))
            }
            SourceKind::Internal => (self.ask_model(question, config, gateway)?, None),
        };

        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                &CacheEntry {
                    question: question.to_string(),
                    source_kind: source,
                    snippets: snippets.clone(),
                    page,
                },
            )?;
        }
        Ok(snippets)
    }

    fn search_with_retry(&self, question: &str) -> Result<SearchResultPage, EvidenceError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.search.search(question) {
                Ok(page) => return Ok(page),
                Err(SearchError::Transient(reason)) if attempts < self.retry.max_attempts() => {
                    log::warn!("search failed ({reason}), retry {attempts}");
                    self.retry.wait(attempts - 1);
                }
                Err(SearchError::Transient(reason)) | Err(SearchError::Fatal(reason)) => {
                    return Err(EvidenceError::SearchUnavailable { attempts, reason })
                }
            }
        }
    }

    fn ask_model(&self, question: &str, config: &RunConfig, gateway: &Gateway) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
        let prompt = format!(
            "{INTERNAL_ANSWER_INSTRUCTION}\nQuestion: {}\nAnswer:",
            crate::prompts::one_line(question)
        );
        let request = ChatRequest::prompt(Role::Summarizer, prompt, config);
        let completion = gateway.complete(&request, config)?;
        let text = completion.text.trim();
        if text.is_empty() {
            return Ok(Vec::new());
        }
        Ok(vec![EvidenceSnippet::internal(
            truncate_chars(text, MAX_SNIPPET_CHARS),
            config.model_for(Role::Summarizer),
        )])
    }
}
