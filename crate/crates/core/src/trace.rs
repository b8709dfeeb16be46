//! Verification traces and their line-delimited JSON record form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claim::{Claim, QaStep, Verdict};

pub const TRACE_SCHEMA: &str = "stepcheck-trace/1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported trace schema {0:?}")]
    Schema(String),
    #[error("trace has no steps")]
    NoSteps,
    #[error("step index {found} at position {position}, expected {expected}")]
    StepIndex { position: usize, expected: u32, found: u32 },
    #[error("step {0} has an empty answer but is not marked no_evidence")]
    EmptyAnswer(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Wall-clock duration of one step, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTiming {
    pub index: u32,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTrace {
    pub claim: Claim,
    pub steps: Vec<QaStep>,
    pub verdict: Verdict,
    pub explanation: String,
    /// Set when the verdict was produced at the question cap (or after a
    /// late unparsable question) rather than on verifier approval.
    pub forced: bool,
    pub config_fingerprint: String,
    pub timings: Vec<StepTiming>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    schema: &'static str,
    #[serde(flatten)]
    trace: &'a VerificationTrace,
}

#[derive(Deserialize)]
struct RecordIn {
    schema: String,
    #[serde(flatten)]
    trace: VerificationTrace,
}

impl VerificationTrace {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.steps.is_empty() {
            return Err(TraceError::NoSteps);
        }
        for (position, step) in self.steps.iter().enumerate() {
            let expected = position as u32 + 1;
            if step.index != expected {
                return Err(TraceError::StepIndex {
                    position,
                    expected,
                    found: step.index,
                });
            }
            if step.answer.is_empty() && !step.no_evidence {
                return Err(TraceError::EmptyAnswer(step.index));
            }
        }
        Ok(())
    }

    /// Single-line JSON record, no trailing newline.
    pub fn to_record(&self) -> String {
        serde_json::to_string(&RecordOut {
            schema: TRACE_SCHEMA,
            trace: self,
        })
        .expect("trace serializes")
    }

    pub fn from_record(line: &str) -> Result<Self, TraceError> {
        let record: RecordIn = serde_json::from_str(line)?;
        if record.schema != TRACE_SCHEMA {
            return Err(TraceError::Schema(record.schema));
        }
        record.trace.validate()?;
        Ok(record.trace)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, traces: &[VerificationTrace]) -> std::io::Result<()> {
    for trace in traces {
        out.write_all(trace.to_record().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<VerificationTrace>, TraceError> {
    let mut traces = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        traces.push(VerificationTrace::from_record(&line)?);
    }
    Ok(traces)
}
