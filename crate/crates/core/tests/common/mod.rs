#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use stepcheck::engine::FrozenClock;
use stepcheck::evidence::{EvidenceCache, FixtureSearch, OfflineSearch, SearchResult};
use stepcheck::gateway::ScriptedBackend;
use stepcheck::retry::RetryPolicy;
use stepcheck::{Engine, Gateway, PromptKit, Retriever, RunConfig};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn hermetic(name: &str) -> PathBuf {
    fixture_dir().join("hermetic").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a golden file, or rewrites it when STEPCHECK_BLESS is set.
pub fn assert_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("STEPCHECK_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with STEPCHECK_BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from the golden file", path.display());
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> CliOutput {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = stepcheck::cli::run_cli(std::iter::once("stepcheck").chain(args.iter().copied()), &mut out, &mut err);
    CliOutput {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Fills `cache` with the fixture search results for every fixture question.
pub fn seed_cache(cache: &Path) {
    let search = format!("fixture:{}", path_str(&hermetic("search.json")));
    let backend = format!("scripted:{}", path_str(&hermetic("scripts.json")));
    let r = cli(&[
        "--config",
        "/dev/null",
        "--cache-dir",
        path_str(cache),
        "--search",
        &search,
        "--backend",
        &backend,
        "cache-warm",
        "--questions",
        path_str(&hermetic("questions.txt")),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

/// Offline scripted benchmark over the hermetic fixtures.
pub fn hermetic_run(cache: &Path, out: &Path) -> CliOutput {
    let backend = format!("scripted:{}", path_str(&hermetic("scripts.json")));
    cli(&[
        "--config",
        "/dev/null",
        "--cache-dir",
        path_str(cache),
        "--search",
        "offline",
        "--backend",
        &backend,
        "run",
        "--dataset",
        path_str(&hermetic("claims.jsonl")),
        "--format",
        "generic",
        "--out",
        path_str(out),
    ])
}

pub fn result(title: &str, n: usize) -> SearchResult {
    SearchResult {
        title: title.to_string(),
        url: format!("https://evidence.example/{n}"),
        snippet: format!("{title} snippet {n}"),
    }
}

/// Engine over a scripted backend and in-memory search, no cache.
pub fn scripted_engine(script: Vec<String>, search: FixtureSearch, config: RunConfig) -> (Engine, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(script).unwrap());
    let gateway = Gateway::new(backend.clone()).with_retry(RetryPolicy::immediate());
    let retriever = Retriever::new(Arc::new(search), None).with_retry(RetryPolicy::immediate());
    let engine = Engine::new(gateway, retriever, Arc::new(PromptKit::default()), config)
        .unwrap()
        .with_clock(Arc::new(FrozenClock::default()));
    (engine, backend)
}

/// Engine that may only read evidence from `cache`.
pub fn cached_engine(script: Vec<String>, cache: &Path, config: RunConfig) -> (Engine, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(script).unwrap());
    let gateway = Gateway::new(backend.clone()).with_retry(RetryPolicy::immediate());
    let retriever =
        Retriever::new(Arc::new(OfflineSearch), Some(EvidenceCache::new(cache))).with_retry(RetryPolicy::immediate());
    let engine = Engine::new(gateway, retriever, Arc::new(PromptKit::default()), config)
        .unwrap()
        .with_clock(Arc::new(FrozenClock::default()));
    (engine, backend)
}
