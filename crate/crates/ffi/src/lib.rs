//! C ABI for the stepcheck verifier.
//!
//! Conventions:
//! * Every fallible function returns a [`StepcheckStatus`]; on anything but
//!   `STEPCHECK_OK` a message is available from [`stepcheck_last_error`]
//!   on the same thread.
//! * Handles are opaque and owned by the caller; release them with the
//!   matching `_free` function. Strings returned through `out` pointers are
//!   released with [`stepcheck_string_free`].
//! * Input strings must be NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use stepcheck::engine::{Clock, FrozenClock, SystemClock};
use stepcheck::evidence::{DuckDuckGoHtml, EvidenceCache, FixtureSearch, OfflineSearch, SearchProvider};
use stepcheck::gateway::{ChatBackend, HttpChatBackend, ScriptBook};
use stepcheck::prompts::{parse_predicate, parse_verdict};
use stepcheck::{precision_recall_f1, Claim, ConfusionCounts, Engine, Gateway, PromptKit, Retriever, RunConfig, SourceKind, Verdict};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepcheckStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    /// The claim could not be verified (gateway, evidence or parse failure).
    Aborted = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepcheckVerdict {
    Supported = 1,
    Refuted = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepcheckMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Opaque run configuration.
pub struct StepcheckConfig {
    config: RunConfig,
    use_cache: bool,
}

enum Backend {
    Scripted(ScriptBook),
    Http,
}

/// Opaque verifier.
pub struct StepcheckEngine {
    config: RunConfig,
    use_cache: bool,
    backend: Backend,
    search: Arc<dyn SearchProvider>,
    prompts: Arc<PromptKit>,
    clock: Arc<dyn Clock>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(StepcheckStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, turning failures and panics into a status plus last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StepcheckStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StepcheckStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {message}"));
            StepcheckStatus::Panic
        }
    }
}

fn invalid(message: impl ToString) -> Failure {
    Failure(StepcheckStatus::InvalidArgument, message.to_string())
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure(StepcheckStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(StepcheckStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(ptr: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if ptr.is_null() {
        Ok(None)
    } else {
        str_arg(ptr, name).map(Some)
    }
}

unsafe fn ref_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure(StepcheckStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn mut_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure(StepcheckStatus::NullArgument, format!("{name} is NULL")))
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(StepcheckStatus::NullArgument, "out is NULL".into()))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next stepcheck call on the same thread.
#[no_mangle]
pub extern "C" fn stepcheck_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn stepcheck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// --- configuration ---------------------------------------------------------

/// Default configuration. Evidence is not cached until a cache directory
/// is set.
#[no_mangle]
pub extern "C" fn stepcheck_config_new() -> *mut StepcheckConfig {
    Box::into_raw(Box::new(StepcheckConfig {
        config: RunConfig::default(),
        use_cache: false,
    }))
}

/// Configuration from a JSON object; missing fields take their defaults.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_from_json(json: *const c_char, out: *mut *mut StepcheckConfig) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let text = str_arg(json, "json")?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(invalid)?;
        let use_cache = value.get("cache_dir").is_some();
        let config: RunConfig = serde_json::from_value(value).map_err(invalid)?;
        config.validate().map_err(invalid)?;
        *out = Box::into_raw(Box::new(StepcheckConfig { config, use_cache }));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_free(config: *mut StepcheckConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// `source` is "web" or "internal".
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_set_source(config: *mut StepcheckConfig, source: *const c_char) -> StepcheckStatus {
    guard(|| {
        let c = mut_arg(config, "config")?;
        c.config.source_kind = match str_arg(source, "source")?.to_ascii_lowercase().as_str() {
            "web" => SourceKind::Web,
            "internal" => SourceKind::Internal,
            other => return Err(invalid(format!("unknown source {other:?} (expected web or internal)"))),
        };
        Ok(())
    })
}

/// # Safety
/// `config` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_set_predicate_mode(config: *mut StepcheckConfig, enabled: bool) -> StepcheckStatus {
    guard(|| {
        mut_arg(config, "config")?.config.predicate_mode = enabled;
        Ok(())
    })
}

/// # Safety
/// `config` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_set_max_questions(config: *mut StepcheckConfig, n: u32) -> StepcheckStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("max_questions must be at least 1"));
        }
        mut_arg(config, "config")?.config.max_questions = n;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_set_model(config: *mut StepcheckConfig, model: *const c_char) -> StepcheckStatus {
    guard(|| {
        let c = mut_arg(config, "config")?;
        let model = str_arg(model, "model")?.trim();
        if model.is_empty() {
            return Err(invalid("model name is empty"));
        }
        c.config.model_name = model.to_string();
        Ok(())
    })
}

/// Enables the on-disk evidence cache in `dir`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_set_cache_dir(config: *mut StepcheckConfig, dir: *const c_char) -> StepcheckStatus {
    guard(|| {
        let c = mut_arg(config, "config")?;
        c.config.cache_dir = PathBuf::from(str_arg(dir, "dir")?);
        c.use_cache = true;
        Ok(())
    })
}

/// Hex fingerprint of the configuration; free with `stepcheck_string_free`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_config_fingerprint(config: *const StepcheckConfig, out: *mut *mut c_char) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        *out = to_c(ref_arg(config, "config")?.config.fingerprint());
        Ok(())
    })
}

// --- engines ---------------------------------------------------------------

fn engine_handle(config: &StepcheckConfig, backend: Backend, search: Arc<dyn SearchProvider>) -> Result<StepcheckEngine, Failure> {
    config.config.validate().map_err(invalid)?;
    let prompts = PromptKit::load(config.config.prompt_dir.as_deref()).map_err(invalid)?;
    let clock: Arc<dyn Clock> = match backend {
        Backend::Scripted(_) => Arc::new(FrozenClock::default()),
        Backend::Http => Arc::new(SystemClock::default()),
    };
    Ok(StepcheckEngine {
        config: config.config.clone(),
        use_cache: config.use_cache,
        backend,
        search,
        prompts: Arc::new(prompts),
        clock,
    })
}

/// Engine replaying scripted model output. `script_json` is either an array
/// of completions shared by all claims or an object mapping claim ids to
/// arrays. `search_json` maps questions to result lists; NULL means no
/// search is available.
///
/// # Safety
/// `config` and `script_json` must be valid; `search_json` may be NULL;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_engine_new_scripted(
    config: *const StepcheckConfig,
    script_json: *const c_char,
    search_json: *const c_char,
    out: *mut *mut StepcheckEngine,
) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let config = ref_arg(config, "config")?;
        let book = ScriptBook::from_json(str_arg(script_json, "script_json")?).map_err(invalid)?;
        let search: Arc<dyn SearchProvider> = match opt_str_arg(search_json, "search_json")? {
            Some(json) => Arc::new(FixtureSearch::from_json(json).map_err(invalid)?),
            None => Arc::new(OfflineSearch),
        };
        *out = Box::into_raw(Box::new(engine_handle(config, Backend::Scripted(book), search)?));
        Ok(())
    })
}

/// Engine talking to an OpenAI-compatible endpoint (configured through the
/// same environment variables as the command line tool) with web search.
///
/// # Safety
/// `config` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_engine_new_http(
    config: *const StepcheckConfig,
    out: *mut *mut StepcheckEngine,
) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let config = ref_arg(config, "config")?;
        let search = Arc::new(DuckDuckGoHtml::new(Duration::from_secs(20)));
        *out = Box::into_raw(Box::new(engine_handle(config, Backend::Http, search)?));
        Ok(())
    })
}

/// # Safety
/// `engine` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_engine_free(engine: *mut StepcheckEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

impl StepcheckEngine {
    fn engine(&self, claim_id: &str) -> Result<Engine, String> {
        let backend: Arc<dyn ChatBackend> = match &self.backend {
            Backend::Scripted(book) => book.backend_for(claim_id).map_err(|e| e.to_string())?,
            Backend::Http => Arc::new(
                HttpChatBackend::from_env(Duration::from_secs(self.config.step_timeout_secs)).map_err(|e| e.to_string())?,
            ),
        };
        let cache = self.use_cache.then(|| EvidenceCache::new(&self.config.cache_dir));
        let retriever = Retriever::new(self.search.clone(), cache);
        Engine::new(Gateway::new(backend), retriever, self.prompts.clone(), self.config.clone())
            .map(|e| e.with_clock(self.clock.clone()))
            .map_err(|e| e.to_string())
    }
}

/// Verifies one claim and writes its trace as a JSON object to `out`.
/// Returns `STEPCHECK_ABORTED` when the claim could not be verified.
///
/// # Safety
/// `engine`, `claim_id` and `claim_text` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_engine_verify(
    engine: *const StepcheckEngine,
    claim_id: *const c_char,
    claim_text: *const c_char,
    out: *mut *mut c_char,
) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let handle = ref_arg(engine, "engine")?;
        let id = str_arg(claim_id, "claim_id")?;
        let claim = Claim::new(id, str_arg(claim_text, "claim_text")?).map_err(invalid)?;
        let engine = handle.engine(id).map_err(invalid)?;
        let trace = engine
            .verify_claim(&claim)
            .map_err(|e| Failure(StepcheckStatus::Aborted, e.to_string()))?;
        *out = to_c(trace.to_record());
        Ok(())
    })
}

// --- parsers and metrics ---------------------------------------------------

/// Parses `Verb(arg, ...) ::: instruction` into a JSON object with `verb`,
/// `arguments` and optional `instruction`.
///
/// # Safety
/// `text` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_parse_predicate(text: *const c_char, out: *mut *mut c_char) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let p = parse_predicate(str_arg(text, "text")?).map_err(|e| Failure(StepcheckStatus::ParseError, e.to_string()))?;
        *out = to_c(serde_json::to_string(&p).expect("predicate serializes"));
        Ok(())
    })
}

/// Extracts the verdict label and explanation from reasoner output.
/// `explanation` may be NULL when not wanted.
///
/// # Safety
/// `text` must be valid and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_parse_verdict(
    text: *const c_char,
    verdict: *mut StepcheckVerdict,
    explanation: *mut *mut c_char,
) -> StepcheckStatus {
    guard(|| {
        check_out(verdict)?;
        let (v, e) = parse_verdict(str_arg(text, "text")?).map_err(|e| Failure(StepcheckStatus::ParseError, e.to_string()))?;
        *verdict = match v {
            Verdict::Supported => StepcheckVerdict::Supported,
            Verdict::Refuted => StepcheckVerdict::Refuted,
        };
        if !explanation.is_null() {
            *explanation = to_c(e);
        }
        Ok(())
    })
}

/// Precision, recall and F1 for the positive class; zero denominators give 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stepcheck_metrics(tp: u64, fp: u64, fn_: u64, tn: u64, out: *mut StepcheckMetrics) -> StepcheckStatus {
    guard(|| {
        check_out(out)?;
        let m = precision_recall_f1(ConfusionCounts { tp, fp, fn_, tn });
        *out = StepcheckMetrics {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        Ok(())
    })
}
