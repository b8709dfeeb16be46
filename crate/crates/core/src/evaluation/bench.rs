use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{precision_recall_f1, ConfusionCounts, EvalError, Metrics};
use crate::claim::Claim;
use crate::config::RunConfig;
use crate::corpus::LabeledClaim;
use crate::engine::ClaimAborted;
use crate::fsutil::atomic_write;
use crate::trace::VerificationTrace;

pub const MANIFEST_SCHEMA: &str = "stepcheck-run/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub claim_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub total: usize,
    pub completed: usize,
    pub failed: usize,
    pub forced: usize,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// Completed traces, in dataset order.
    pub traces: Vec<VerificationTrace>,
    /// Aborted claims, in dataset order. Not counted in the metrics.
    pub failures: Vec<Failure>,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub counts: RunCounts,
}

impl BenchmarkResult {
    pub fn traces_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&t.to_record());
            out.push('\n');
        }
        out
    }

    /// Writes `traces.jsonl` and `manifest.json` under `dir`, each atomically.
    pub fn persist(&self, dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
        atomic_write(&dir.join("traces.jsonl"), self.traces_jsonl().as_bytes())?;
        let mut json = serde_json::to_string_pretty(manifest)?;
        json.push('\n');
        atomic_write(&dir.join("manifest.json"), json.as_bytes())
    }
}

/// Runs `verify` over every claim with at most `concurrency` claims in
/// flight. Results are gathered back into dataset order, so the output does
/// not depend on scheduling.
pub fn run_benchmark<F>(dataset: &[LabeledClaim], concurrency: usize, verify: F) -> Result<BenchmarkResult, EvalError>
where
    F: Fn(&Claim) -> Result<VerificationTrace, ClaimAborted> + Sync,
{
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let workers = concurrency.clamp(1, dataset.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<VerificationTrace, ClaimAborted>>>> =
        dataset.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = dataset.get(i) else { break };
                let outcome = verify(&item.claim);
                if let Err(e) = &outcome {
                    log::warn!("{e}");
                }
                *slots[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut confusion = ConfusionCounts::default();
    for (item, slot) in dataset.iter().zip(slots) {
        match slot.into_inner().expect("result slot").expect("every claim ran") {
            Ok(trace) => {
                confusion.record(trace.verdict, item.gold);
                traces.push(trace);
            }
            Err(aborted) => failures.push(Failure {
                claim_id: aborted.claim_id.clone(),
                reason: error_chain(&aborted),
            }),
        }
    }
    if traces.is_empty() {
        return Err(EvalError::AllFailed(failures.len()));
    }
    let counts = RunCounts {
        total: dataset.len(),
        completed: traces.len(),
        failed: failures.len(),
        forced: traces.iter().filter(|t| t.forced).count(),
    };
    Ok(BenchmarkResult {
        metrics: precision_recall_f1(confusion),
        traces,
        failures,
        confusion,
        counts,
    })
}

fn error_chain(err: &dyn std::error::Error) -> String {
    let mut text = err.to_string();
    let mut source = err.source();
    while let Some(inner) = source {
        let part = inner.to_string();
        if !text.contains(&part) {
            text.push_str(": ");
            text.push_str(&part);
        }
        source = inner.source();
    }
    text
}

/// Summary written next to the traces of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub system: String,
    pub evidence_source: String,
    pub dataset: String,
    pub dataset_path: String,
    pub config_fingerprint: String,
    pub config: RunConfig,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub counts: RunCounts,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub failures: Vec<Failure>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        result: &BenchmarkResult,
        config: &RunConfig,
        dataset: &str,
        dataset_path: &str,
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
    ) -> Self {
        let system = if config.predicate_mode {
            format!("{} with predicates", config.model_name)
        } else {
            config.model_name.clone()
        };
        let evidence_source = match config.source_kind {
            crate::claim::SourceKind::Web => "whole web",
            crate::claim::SourceKind::Internal => "internal",
        };
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            system,
            evidence_source: evidence_source.to_string(),
            dataset: dataset.to_string(),
            dataset_path: dataset_path.to_string(),
            config_fingerprint: config.fingerprint(),
            config: config.clone(),
            started_at,
            finished_at,
            counts: result.counts,
            confusion: result.confusion,
            metrics: result.metrics,
            failures: result.failures.clone(),
        }
    }
}
