use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;
use std::time::Duration;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::Deserialize;

use super::{normalize_question, SearchError, SearchProvider, SearchResult, SearchResultPage};

const USER_AGENT: &str = concat!("stepcheck/", env!("CARGO_PKG_VERSION"));

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .user_agent(USER_AGENT)
        .build()
        .new_agent()
}

fn fetch(agent: &ureq::Agent, url: &str) -> Result<String, SearchError> {
    let mut response = agent.get(url).call().map_err(transport)?;
    let status = response.status().as_u16();
    let body = response.body_mut().read_to_string().map_err(transport)?;
    match status {
        // DuckDuckGo answers 202 when it throttles.
        202 | 408 | 429 | 500..=599 => Err(SearchError::Transient(format!("HTTP {status}"))),
        200..=299 => Ok(body),
        _ => Err(SearchError::Fatal(format!("HTTP {status}"))),
    }
}

fn transport(err: ureq::Error) -> SearchError {
    match err {
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
            SearchError::Transient(err.to_string())
        }
        other => SearchError::Fatal(other.to_string()),
    }
}

/// Scrapes the JavaScript-free DuckDuckGo results page.
pub struct DuckDuckGoHtml {
    base: String,
    agent: ureq::Agent,
}

static DDG_RESULT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?s)<a[^>]*class="result__a"[^>]*href="([^"]*)"[^>]*>(.*?)</a>"#).unwrap()
});
static DDG_SNIPPET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?s)class="result__snippet"[^>]*>(.*?)</a>"#).unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

fn strip_html(fragment: &str) -> String {
    let text = TAG.replace_all(fragment, "");
    html_escape::decode_html_entities(&text)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// DuckDuckGo wraps targets as `//duckduckgo.com/l/?uddg=<encoded>&...`.
fn unwrap_redirect(href: &str) -> String {
    let href = html_escape::decode_html_entities(href);
    if let Some((_, query)) = href.split_once('?') {
        if href.contains("/l/") {
            if let Some((_, target)) = url::form_urlencoded::parse(query.as_bytes()).find(|(k, _)| k == "uddg") {
                return target.into_owned();
            }
        }
    }
    if let Some(rest) = href.strip_prefix("//") {
        return format!("https://{rest}");
    }
    href.into_owned()
}

impl DuckDuckGoHtml {
    pub const DEFAULT_BASE: &'static str = "https://html.duckduckgo.com/html/";

    pub fn new(timeout: Duration) -> Self {
        Self::with_base(Self::DEFAULT_BASE, timeout)
    }

    pub fn with_base(base: &str, timeout: Duration) -> Self {
        Self {
            base: base.to_string(),
            agent: agent(timeout),
        }
    }

    /// Results in page order, skipping sponsored entries.
    pub fn parse_page(html: &str) -> Vec<SearchResult> {
        let mut results = Vec::new();
        let blocks: Vec<&str> = html.split("class=\"result ").skip(1).collect();
        for block in blocks {
            let head = &block[..block.find('>').unwrap_or(block.len())];
            if head.contains("result--ad") {
                continue;
            }
            let Some(link) = DDG_RESULT.captures(block) else { continue };
            let url = unwrap_redirect(&link[1]);
            if url.contains("duckduckgo.com/y.js") {
                continue;
            }
            let snippet = DDG_SNIPPET
                .captures(block)
                .map(|c| strip_html(&c[1]))
                .unwrap_or_default();
            results.push(SearchResult {
                title: strip_html(&link[2]),
                url,
                snippet,
            });
        }
        results
    }
}

impl SearchProvider for DuckDuckGoHtml {
    fn search(&self, query: &str) -> Result<SearchResultPage, SearchError> {
        let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
        let body = fetch(&self.agent, &format!("{}?q={encoded}", self.base))?;
        if body.contains("anomaly-modal") {
            return Err(SearchError::Transient("rate limited by search engine".into()));
        }
        Ok(SearchResultPage {
            query: query.to_string(),
            results: Self::parse_page(&body),
            fetched_at: Utc::now(),
        })
    }
}

/// A SearXNG instance with the JSON output format enabled.
pub struct SearxJson {
    base: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct SearxPage {
    #[serde(default)]
    results: Vec<SearxResult>,
}

#[derive(Deserialize)]
struct SearxResult {
    #[serde(default)]
    title: String,
    #[serde(default)]
    url: String,
    #[serde(default)]
    content: String,
}

impl SearxJson {
    pub fn new(base: &str, timeout: Duration) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
            agent: agent(timeout),
        }
    }

    pub fn parse_page(body: &str) -> Result<Vec<SearchResult>, SearchError> {
        let page: SearxPage =
            serde_json::from_str(body).map_err(|e| SearchError::Fatal(format!("malformed search response: {e}")))?;
        Ok(page
            .results
            .into_iter()
            .map(|r| SearchResult {
                title: r.title,
                url: r.url,
                snippet: r.content,
            })
            .collect())
    }
}

impl SearchProvider for SearxJson {
    fn search(&self, query: &str) -> Result<SearchResultPage, SearchError> {
        let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
        let body = fetch(&self.agent, &format!("{}/search?format=json&q={encoded}", self.base))?;
        Ok(SearchResultPage {
            query: query.to_string(),
            results: Self::parse_page(&body)?,
            fetched_at: Utc::now(),
        })
    }
}

/// Canned results keyed by normalized question. Unknown questions get an
/// empty page. Pages carry a fixed timestamp so output is reproducible.
#[derive(Debug, Clone, Default)]
pub struct FixtureSearch {
    pages: HashMap<String, Vec<SearchResult>>,
}

impl FixtureSearch {
    pub fn from_pairs<Q: AsRef<str>>(pairs: impl IntoIterator<Item = (Q, Vec<SearchResult>)>) -> Self {
        Self {
            pages: pairs
                .into_iter()
                .map(|(q, r)| (normalize_question(q.as_ref()), r))
                .collect(),
        }
    }

    /// A JSON object mapping question text to a list of
    /// `{title, url, snippet}` results.
    pub fn from_json(json: &str) -> Result<Self, SearchError> {
        let raw: HashMap<String, Vec<SearchResult>> =
            serde_json::from_str(json).map_err(|e| SearchError::Fatal(format!("bad search fixture: {e}")))?;
        Ok(Self::from_pairs(raw))
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SearchError::Fatal(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, query: &str) -> Result<SearchResultPage, SearchError> {
        Ok(SearchResultPage {
            query: query.to_string(),
            results: self.pages.get(&normalize_question(query)).cloned().unwrap_or_default(),
            fetched_at: DateTime::<Utc>::UNIX_EPOCH,
        })
    }
}

/// Refuses every search. Runs that should never touch the network use this,
/// so a cache miss fails loudly.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineSearch;

impl SearchProvider for OfflineSearch {
    fn search(&self, query: &str) -> Result<SearchResultPage, SearchError> {
        Err(SearchError::Fatal(format!("offline: no cached evidence for {query:?}")))
    }
}
