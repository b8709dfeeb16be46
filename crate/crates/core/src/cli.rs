//! Command-line front end. `run_cli` is the whole program; `main` only
//! forwards process arguments and the exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::claim::{Claim, SourceKind};
use crate::config::RunConfig;
use crate::corpus::{self, DatasetFormat, LabelMaps};
use crate::engine::{Clock, Engine, FrozenClock, SystemClock};
use crate::evaluation::{self, baseline_rows, emit_report, render_text, ReportRow, RunManifest};
use crate::evidence::{
    cache_key, DuckDuckGoHtml, EvidenceCache, FixtureSearch, OfflineSearch, Retriever, SearchProvider, SearxJson,
    CACHE_DIR_ENV,
};
use crate::fsutil::atomic_write;
use crate::gateway::{ChatBackend, Gateway, HttpChatBackend, ScriptBook};
use crate::prompts::PromptKit;
use crate::trace::VerificationTrace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const SEARCH_TIMEOUT: Duration = Duration::from_secs(20);

#[derive(Debug, Parser)]
#[command(name = "stepcheck", version, about = "Step-by-step claim verification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration [default: ~/.config/stepcheck/config.toml when present]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Chat backend: `http`, or `scripted:PATH` for a JSON script file
    #[arg(long, global = true, default_value = "http")]
    pub backend: String,
    /// Search provider: `ddg`, `searx:URL`, `fixture:PATH` or `offline`
    #[arg(long, global = true, default_value = "ddg")]
    pub search: String,
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Directory with replacement prompt bank files
    #[arg(long, global = true, value_name = "DIR")]
    pub prompt_dir: Option<PathBuf>,
    /// Evidence source: `web` or `internal`
    #[arg(long, global = true)]
    pub source: Option<String>,
    /// Ask questions with predicates and judge with the predicate reasoner
    #[arg(long, global = true)]
    pub predicates: bool,
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub max_questions: Option<u32>,
    /// More log output; repeat for debug
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify one claim and print its trace
    Verify {
        claim: String,
        /// Claim id [default: derived from the text]
        #[arg(long)]
        id: Option<String>,
        /// Where to write the trace record
        #[arg(long, default_value = "trace.jsonl")]
        out: PathBuf,
    },
    /// Verify every claim of a dataset and score the verdicts
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// scifact, healthfc, covert or generic
        #[arg(long)]
        format: String,
        /// Replacement label table
        #[arg(long, value_name = "PATH")]
        labels: Option<PathBuf>,
        #[arg(long, value_name = "K")]
        concurrency: Option<usize>,
        /// Only the first N claims
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Combine run manifests into a comparison table
    Report {
        /// Run directories containing manifest.json
        #[arg(long = "run", value_name = "DIR", required = true)]
        runs: Vec<PathBuf>,
        /// Leave out the published reference rows
        #[arg(long)]
        no_baselines: bool,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Fetch and cache evidence for a file of questions, one per line
    CacheWarm {
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
    },
    /// Delete every cached evidence entry
    CacheClear,
}

/// A failure with its exit code. Usage errors are 2, everything else 1.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn failure(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.to_string(),
    }
}

pub fn default_config_path() -> Option<PathBuf> {
    std::env::var_os("HOME").map(|home| PathBuf::from(home).join(".config/stepcheck/config.toml"))
}

/// Defaults, then the config file, then the environment, then flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, String> {
    let explicit = global.config.is_some();
    let path = global.config.clone().or_else(default_config_path);
    let mut config = match path {
        Some(path) if explicit || path.exists() => {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            toml::from_str::<RunConfig>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        _ => RunConfig::default(),
    };
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
        config.cache_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &global.cache_dir {
        config.cache_dir = dir.clone();
    }
    if let Some(dir) = &global.prompt_dir {
        config.prompt_dir = Some(dir.clone());
    }
    if let Some(source) = &global.source {
        config.source_kind = source.parse::<SourceKind>().map_err(|e| e.to_string())?;
    }
    if global.predicates {
        config.predicate_mode = true;
    }
    if let Some(model) = &global.model {
        config.model_name = model.clone();
    }
    if let Some(n) = global.max_questions {
        config.max_questions = n;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

enum BackendChoice {
    Http,
    Scripted(ScriptBook),
}

struct Context {
    config: RunConfig,
    backend: BackendChoice,
    search: Arc<dyn SearchProvider>,
    prompts: Arc<PromptKit>,
    clock: Arc<dyn Clock>,
}

impl Context {
    fn new(global: &GlobalArgs, config: RunConfig) -> Result<Self, Failure> {
        let backend = match global.backend.as_str() {
            "http" => BackendChoice::Http,
            other => match other.strip_prefix("scripted:") {
                Some(path) => BackendChoice::Scripted(ScriptBook::load(Path::new(path)).map_err(|e| usage(e.to_string()))?),
                None => return Err(usage(format!("unknown backend {other:?} (expected http or scripted:PATH)"))),
            },
        };
        let search: Arc<dyn SearchProvider> = match global.search.as_str() {
            "ddg" => Arc::new(DuckDuckGoHtml::new(SEARCH_TIMEOUT)),
            "offline" => Arc::new(OfflineSearch),
            other => {
                if let Some(url) = other.strip_prefix("searx:") {
                    Arc::new(SearxJson::new(url, SEARCH_TIMEOUT))
                } else if let Some(path) = other.strip_prefix("fixture:") {
                    Arc::new(FixtureSearch::load(Path::new(path)).map_err(|e| usage(e.to_string()))?)
                } else {
                    return Err(usage(format!(
                        "unknown search provider {other:?} (expected ddg, searx:URL, fixture:PATH or offline)"
                    )));
                }
            }
        };
        let prompts = Arc::new(PromptKit::load(config.prompt_dir.as_deref()).map_err(|e| usage(e.to_string()))?);
        // Scripted runs are replays: a still clock keeps their output identical.
        let clock: Arc<dyn Clock> = match backend {
            BackendChoice::Scripted(_) => Arc::new(FrozenClock::default()),
            BackendChoice::Http => Arc::new(SystemClock::default()),
        };
        Ok(Self {
            config,
            backend,
            search,
            prompts,
            clock,
        })
    }

    fn chat_backend(&self, claim_id: &str) -> Result<Arc<dyn ChatBackend>, String> {
        match &self.backend {
            BackendChoice::Http => HttpChatBackend::from_env(Duration::from_secs(self.config.step_timeout_secs))
                .map(|b| Arc::new(b) as Arc<dyn ChatBackend>)
                .map_err(|e| e.to_string()),
            BackendChoice::Scripted(book) => book
                .backend_for(claim_id)
                .map(|b| b as Arc<dyn ChatBackend>)
                .map_err(|e| e.to_string()),
        }
    }

    fn retriever(&self) -> Retriever {
        Retriever::new(self.search.clone(), Some(EvidenceCache::new(&self.config.cache_dir)))
    }

    fn engine(&self, claim_id: &str) -> Result<Engine, String> {
        let gateway = Gateway::new(self.chat_backend(claim_id)?);
        Engine::new(gateway, self.retriever(), self.prompts.clone(), self.config.clone())
            .map(|e| e.with_clock(self.clock.clone()))
            .map_err(|e| e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    init_logging(cli.global.verbose);
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    // Validate command arguments that do not need the config first.
    if let Command::Verify { claim, .. } = &cli.command {
        if claim.trim().is_empty() {
            return Err(usage("claim text is empty"));
        }
    }
    if let Command::Report { runs, no_baselines, out: dir } = &cli.command {
        return report(runs, *no_baselines, dir, out);
    }
    let config = resolve_config(&cli.global).map_err(usage)?;
    match &cli.command {
        Command::CacheClear => {
            let removed = EvidenceCache::new(&config.cache_dir).clear().map_err(failure)?;
            writeln!(out, "removed {removed} cache entries from {}", config.cache_dir.display()).map_err(failure)?;
            Ok(())
        }
        Command::Verify { claim, id, out: path } => {
            let ctx = Context::new(&cli.global, config)?;
            verify(&ctx, claim, id.as_deref(), path, out, err)
        }
        Command::Run {
            dataset,
            format,
            labels,
            concurrency,
            limit,
            out: dir,
        } => {
            let mut config = config;
            if let Some(k) = concurrency {
                config.concurrency_limit = *k;
                config.validate().map_err(|e| usage(e.to_string()))?;
            }
            let format: DatasetFormat = format.parse().map_err(|e: corpus::CorpusError| usage(e.to_string()))?;
            if !dataset.is_file() {
                return Err(usage(format!("dataset file {} not found", dataset.display())));
            }
            let maps = match labels {
                Some(path) => LabelMaps::load(path).map_err(|e| usage(e.to_string()))?,
                None => LabelMaps::default(),
            };
            let ctx = Context::new(&cli.global, config)?;
            run(&ctx, dataset, format, &maps, *limit, dir, out, err)
        }
        Command::CacheWarm { questions } => {
            let ctx = Context::new(&cli.global, config)?;
            cache_warm(&ctx, questions, out)
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn derived_claim_id(text: &str) -> String {
    let digest = Sha256::digest(text.trim().as_bytes());
    format!("claim-{}", &hex::encode(digest)[..12])
}

fn print_trace(trace: &VerificationTrace, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "CLAIM: {}", trace.claim.text().trim())?;
    for step in &trace.steps {
        writeln!(out, "Q{}: {}", step.index, step.question)?;
        if let Some(p) = &step.predicate {
            writeln!(out, "  predicate: {p}")?;
        }
        for s in &step.snippets {
            let source = s.source_ref.as_deref().unwrap_or("-");
            writeln!(out, "  [{}] {}", s.rank, source)?;
        }
        writeln!(out, "A{}: {}", step.index, step.rendered_answer())?;
        if let Some(d) = step.decision {
            writeln!(out, "  verifier: {d:?}")?;
        }
    }
    writeln!(out, "VERDICT: {}", trace.verdict.label())?;
    if trace.forced {
        writeln!(out, "(verdict forced after {} questions)", trace.steps.len())?;
    }
    writeln!(out, "EXPLANATION: {}", trace.explanation)
}

fn verify(
    ctx: &Context,
    text: &str,
    id: Option<&str>,
    path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let id = id.map(str::to_string).unwrap_or_else(|| derived_claim_id(text));
    let claim = Claim::new(id.clone(), text).map_err(|e| usage(e.to_string()))?;
    let engine = ctx.engine(&id).map_err(usage)?;
    match engine.verify_claim(&claim) {
        Ok(trace) => {
            print_trace(&trace, out).map_err(failure)?;
            atomic_write(path, format!("{}\n", trace.to_record()).as_bytes()).map_err(failure)?;
            Ok(())
        }
        Err(aborted) => {
            let _ = writeln!(err, "{aborted}");
            Err(failure(format!("claim {id} aborted")))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    ctx: &Context,
    path: &Path,
    format: DatasetFormat,
    maps: &LabelMaps,
    limit: Option<usize>,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let mut dataset = corpus::load_with(path, format, maps).map_err(|e| usage(e.to_string()))?;
    let s = dataset.summary;
    writeln!(
        out,
        "loaded {} claims ({} supported, {} refuted; {} of {} records dropped)",
        s.kept, s.supported, s.refuted, s.dropped, s.total
    )
    .map_err(failure)?;
    if let Some(n) = limit {
        dataset.claims.truncate(n);
    }
    if dataset.claims.is_empty() {
        return Err(failure("no claims to verify"));
    }

    let started = ctx.clock.wall();
    let result = evaluation::run_benchmark(&dataset.claims, ctx.config.concurrency_limit, |claim| {
        let engine = ctx.engine(claim.id()).map_err(|reason| crate::engine::ClaimAborted {
            claim_id: claim.id().to_string(),
            source: crate::engine::EngineError::Gateway(crate::gateway::GatewayError::Setup(reason)),
        })?;
        engine.verify_claim(claim)
    })
    .map_err(failure)?;
    let finished = ctx.clock.wall();

    let manifest = RunManifest::new(
        &result,
        &ctx.config,
        format.display_name(),
        &path.display().to_string(),
        started,
        finished,
    );
    result.persist(dir, &manifest).map_err(failure)?;
    let mut rows = vec![ReportRow::from_manifest(&manifest)];
    rows.extend(baseline_rows().into_iter().filter(|r| r.dataset == format.display_name()));
    emit_report(&rows, dir).map_err(failure)?;

    for f in &result.failures {
        let _ = writeln!(err, "aborted {}: {}", f.claim_id, f.reason);
    }
    let m = result.metrics;
    let c = result.counts;
    writeln!(
        out,
        "precision={:.4} recall={:.4} f1={:.4} (completed {}/{}, failed {}, forced {})",
        m.precision, m.recall, m.f1, c.completed, c.total, c.failed, c.forced
    )
    .map_err(failure)?;
    writeln!(out, "wrote {}", dir.display()).map_err(failure)?;
    Ok(())
}

fn report(runs: &[PathBuf], no_baselines: bool, dir: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for run in runs {
        let path = run.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| failure(format!("{}: {e}", path.display())))?;
        rows.push(ReportRow::from_manifest(&manifest));
    }
    if !no_baselines {
        rows.extend(baseline_rows());
    }
    emit_report(&rows, dir).map_err(failure)?;
    let mut marked = rows;
    evaluation::mark_best(&mut marked);
    write!(out, "{}", render_text(&marked)).map_err(failure)?;
    Ok(())
}

fn cache_warm(ctx: &Context, questions: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(questions).map_err(|e| usage(format!("{}: {e}", questions.display())))?;
    let retriever = ctx.retriever();
    let cache = retriever.cache().expect("cli retriever has a cache").clone();
    let gateway = match ctx.config.source_kind {
        SourceKind::Internal => Some(Gateway::new(ctx.chat_backend("cache-warm").map_err(usage)?)),
        // Web retrieval never calls the model; a backend that refuses
        // everything stands in.
        SourceKind::Web => None,
    };
    let gateway = gateway.unwrap_or_else(|| Gateway::new(Arc::new(NoModel)));
    let fingerprint = ctx.config.fingerprint();
    let (mut fetched, mut present) = (0usize, 0usize);
    for question in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let key = cache_key(question, ctx.config.source_kind, &fingerprint);
        if cache.get(&key).map_err(failure)?.is_some() {
            present += 1;
            continue;
        }
        retriever
            .retrieve(question, ctx.config.source_kind, &ctx.config, &fingerprint, &gateway)
            .map_err(|e| failure(format!("{question:?}: {e}")))?;
        fetched += 1;
    }
    writeln!(out, "cached {fetched} questions ({present} already present)").map_err(failure)?;
    Ok(())
}

struct NoModel;

impl ChatBackend for NoModel {
    fn send(
        &self,
        _: &crate::gateway::ChatRequest,
        _: &str,
    ) -> Result<crate::gateway::Completion, crate::gateway::BackendError> {
        Err(crate::gateway::BackendError::Fatal("no model configured".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(std::iter::once("stepcheck").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["verify", ""]).0, EXIT_USAGE);
        assert_eq!(run_args(&["verify", "x", "--max-questions", "0", "--config", "/dev/null"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["verify", "x", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["verify", "x", "--backend", "carrier-pigeon", "--config", "/dev/null"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["verify", "x", "--source", "dreams", "--config", "/dev/null"]).0, EXIT_USAGE);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("cache-warm"));
    }

    #[test]
    fn precedence_flags_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, "model_name = \"from-file\"\nmax_questions = 3\nsource_kind = \"internal\"\n").unwrap();
        let cli = Cli::try_parse_from([
            "stepcheck",
            "--config",
            path.to_str().unwrap(),
            "--max-questions",
            "4",
            "cache-clear",
        ])
        .unwrap();
        let c = resolve_config(&cli.global).unwrap();
        assert_eq!(c.model_name, "from-file");
        assert_eq!(c.max_questions, 4);
        assert_eq!(c.source_kind, SourceKind::Internal);
    }

    #[test]
    fn derived_ids_are_stable() {
        assert_eq!(derived_claim_id("Honey cures colds"), derived_claim_id("  Honey cures colds "));
        assert!(derived_claim_id("x").starts_with("claim-"));
    }
}
