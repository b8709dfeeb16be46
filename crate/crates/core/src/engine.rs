//! The iterative verification loop: ask, gather, check, repeat, then judge.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::claim::{Claim, ClaimError, EvidenceSnippet, QaStep, SourceKind, Verdict, VerifierDecision, NO_EVIDENCE_ANSWER};
use crate::config::{ConfigError, Role, RunConfig};
use crate::evidence::{normalize_question, EvidenceError, Retriever};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::predicate::Predicate;
use crate::prompts::{
    parse_question, parse_question_with_predicate, parse_verdict, parse_verifier_decision, ParseError, PromptError,
    PromptKit, PromptText,
};
use crate::trace::{StepTiming, VerificationTrace};

const VERDICT_RETRY_NOTE: &str =
    "Answer with exactly one bracketed label, [SUPPORTED] or [REFUTED], followed by an explanation.";

/// Time source for step timings and run timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic microseconds since an arbitrary origin.
    fn monotonic_us(&self) -> u64;
    fn wall(&self) -> DateTime<Utc>;
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn monotonic_us(&self) -> u64 {
        self.origin.elapsed().as_micros() as u64
    }

    fn wall(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Stands still unless advanced by hand. Scripted runs use it so traces and
/// manifests come out byte-identical.
#[derive(Default)]
pub struct FrozenClock {
    us: AtomicU64,
}

impl FrozenClock {
    pub fn advance(&self, by: Duration) {
        self.us.fetch_add(by.as_micros() as u64, Ordering::SeqCst);
    }
}

impl Clock for FrozenClock {
    fn monotonic_us(&self) -> u64 {
        self.us.load(Ordering::SeqCst)
    }

    fn wall(&self) -> DateTime<Utc> {
        DateTime::<Utc>::UNIX_EPOCH + chrono::Duration::microseconds(self.monotonic_us() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Phase {
    NeedQuestion,
    NeedAnswer,
    NeedDecision,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal phase transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: Phase,
    pub to: Phase,
}

/// Per-claim loop state. Every phase change goes through [`EngineState::enter`].
#[derive(Debug, Clone)]
pub struct EngineState {
    pub claim: Claim,
    pub steps: Vec<QaStep>,
    phase: Phase,
    visited: Vec<Phase>,
}

impl EngineState {
    pub fn new(claim: Claim) -> Self {
        Self {
            claim,
            steps: Vec::new(),
            phase: Phase::NeedQuestion,
            visited: vec![Phase::NeedQuestion],
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Every phase entered so far, starting with `NeedQuestion`.
    pub fn visited(&self) -> &[Phase] {
        &self.visited
    }

    pub fn allowed(from: Phase, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (from, to),
            (NeedQuestion, NeedAnswer) | (NeedAnswer, NeedDecision) | (NeedDecision, NeedQuestion) | (NeedDecision, Terminal)
        )
    }

    pub fn enter(&mut self, to: Phase) -> Result<(), IllegalTransition> {
        if !Self::allowed(self.phase, to) {
            return Err(IllegalTransition { from: self.phase, to });
        }
        self.phase = to;
        self.visited.push(to);
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid claim: {0}")]
    Claim(#[from] ClaimError),
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("step {step} took {elapsed:?}, over the {limit:?} limit")]
    StepTimeout { step: u32, elapsed: Duration, limit: Duration },
    #[error(transparent)]
    Transition(#[from] IllegalTransition),
}

#[derive(Debug, Error)]
#[error("claim {claim_id} aborted: {source}")]
pub struct ClaimAborted {
    pub claim_id: String,
    #[source]
    pub source: EngineError,
}

/// Evidence gathered for one question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub snippets: Vec<EvidenceSnippet>,
    pub answer: String,
    pub no_evidence: bool,
}

#[derive(Clone)]
pub struct Engine {
    gateway: Gateway,
    retriever: Retriever,
    prompts: Arc<PromptKit>,
    config: RunConfig,
    fingerprint: String,
    clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(gateway: Gateway, retriever: Retriever, prompts: Arc<PromptKit>, config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            gateway,
            retriever,
            prompts,
            fingerprint: config.fingerprint(),
            config,
            clock: Arc::new(SystemClock::default()),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn verify_text(&self, id: &str, text: &str) -> Result<VerificationTrace, ClaimAborted> {
        let claim = Claim::new(id, text).map_err(|e| ClaimAborted {
            claim_id: id.to_string(),
            source: e.into(),
        })?;
        self.verify_claim(&claim)
    }

    pub fn verify_claim(&self, claim: &Claim) -> Result<VerificationTrace, ClaimAborted> {
        self.verify_claim_with_state(claim).map(|(trace, _)| trace)
    }

    /// Like [`Engine::verify_claim`] but also hands back the final loop state.
    pub fn verify_claim_with_state(&self, claim: &Claim) -> Result<(VerificationTrace, EngineState), ClaimAborted> {
        let abort = |source: EngineError| ClaimAborted {
            claim_id: claim.id().to_string(),
            source,
        };
        if claim.text().trim().is_empty() {
            return Err(abort(ClaimError::EmptyText.into()));
        }
        let mut state = EngineState::new(claim.clone());
        let mut timings = Vec::new();
        let limit = Duration::from_secs(self.config.step_timeout_secs);
        let mut forced = true;

        while state.steps.len() < self.config.max_questions as usize {
            let index = state.steps.len() as u32 + 1;
            let started = self.clock.monotonic_us();

            let (question, predicate) = match self.next_question(claim, &state.steps) {
                Ok(q) => q,
                Err(e @ EngineError::Parse(_)) if index > 1 => {
                    log::warn!("claim {}: {e}; finalizing with {} steps", claim.id(), state.steps.len());
                    break;
                }
                Err(e) => return Err(abort(e)),
            };
            // The loop only re-enters NeedQuestion once a question exists, so
            // a late parse failure finalizes straight from NeedDecision.
            if state.phase() == Phase::NeedDecision {
                state.enter(Phase::NeedQuestion).map_err(|e| abort(e.into()))?;
            }
            state.enter(Phase::NeedAnswer).map_err(|e| abort(e.into()))?;

            let answer = self.answer_question(&question).map_err(abort)?;
            state.steps.push(QaStep {
                index,
                question,
                predicate,
                snippets: answer.snippets,
                answer: answer.answer,
                no_evidence: answer.no_evidence,
                decision: None,
            });
            state.enter(Phase::NeedDecision).map_err(|e| abort(e.into()))?;

            let decision = self.decide(claim, &state.steps).map_err(abort)?;
            state.steps.last_mut().expect("step was just pushed").decision = Some(decision);

            let elapsed_us = self.clock.monotonic_us().saturating_sub(started);
            let elapsed = Duration::from_micros(elapsed_us);
            if elapsed > limit {
                return Err(abort(EngineError::StepTimeout { step: index, elapsed, limit }));
            }
            timings.push(StepTiming { index, elapsed_us });

            if decision == VerifierDecision::Enough {
                forced = false;
                break;
            }
        }

        let (verdict, explanation) = self.finalize(claim, &state.steps).map_err(abort)?;
        state.enter(Phase::Terminal).map_err(|e| abort(e.into()))?;

        let trace = VerificationTrace {
            claim: claim.clone(),
            steps: state.steps.clone(),
            verdict,
            explanation,
            forced,
            config_fingerprint: self.fingerprint.clone(),
            timings,
        };
        Ok((trace, state))
    }

    fn complete(&self, role: Role, prompt: &PromptText) -> Result<String, EngineError> {
        let request = ChatRequest::prompt(role, prompt.text(), &self.config);
        Ok(self.gateway.complete(&request, &self.config)?.text)
    }

    /// Retrieves evidence and condenses it into an answer. Internal-source
    /// evidence is already a direct answer and is used as-is.
    pub fn answer_question(&self, question: &str) -> Result<Answer, EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::EmptyQuestion);
        }
        let snippets = self.retriever.retrieve(
            question,
            self.config.source_kind,
            &self.config,
            &self.fingerprint,
            &self.gateway,
        )?;
        if snippets.is_empty() {
            return Ok(Answer {
                snippets,
                answer: NO_EVIDENCE_ANSWER.to_string(),
                no_evidence: true,
            });
        }
        let answer = match self.config.source_kind {
            SourceKind::Internal => snippets[0].text.trim().to_string(),
            SourceKind::Web => {
                let prompt = self.prompts.render_summarizer(question, &snippets)?;
                clean_answer(&self.complete(Role::Summarizer, &prompt)?)
            }
        };
        if answer.is_empty() {
            return Ok(Answer {
                snippets,
                answer: NO_EVIDENCE_ANSWER.to_string(),
                no_evidence: true,
            });
        }
        Ok(Answer {
            snippets,
            answer,
            no_evidence: false,
        })
    }

    /// Generates the next question (and predicate, in predicate mode). A
    /// repeat of an earlier question is re-asked once with a note; the
    /// second completion is accepted as-is.
    pub fn next_question(&self, claim: &Claim, history: &[QaStep]) -> Result<(String, Option<Predicate>), EngineError> {
        let predicate_mode = self.config.predicate_mode;
        let prompt = match (history.is_empty(), predicate_mode) {
            (true, false) => self.prompts.render_first_question(claim),
            (false, false) => self.prompts.render_followup_question(claim, history)?,
            (true, true) => self.prompts.render_predicate_first(claim),
            (false, true) => self.prompts.render_predicate_followup(claim, history)?,
        };
        let parse = |text: &str| -> Result<(String, Option<Predicate>), EngineError> {
            if predicate_mode {
                let (q, p) = parse_question_with_predicate(text)?;
                Ok((q, Some(p)))
            } else {
                Ok((parse_question(text)?, None))
            }
        };

        let first = parse(&self.complete(Role::QuestionGen, &prompt)?)?;
        let seen = |q: &str| {
            let key = normalize_question(q);
            history.iter().any(|s| normalize_question(&s.question) == key)
        };
        if !seen(&first.0) {
            return Ok(first);
        }
        log::debug!("claim {}: repeated question {:?}, asking again", claim.id(), first.0);
        let note = format!("Already asked: {}. Ask a different question.", first.0);
        parse(&self.complete(Role::QuestionGen, &prompt.with_note(&note))?)
    }

    pub fn decide(&self, claim: &Claim, history: &[QaStep]) -> Result<VerifierDecision, EngineError> {
        let prompt = self.prompts.render_verifier(claim, history)?;
        Ok(parse_verifier_decision(&self.complete(Role::Reasoner, &prompt)?))
    }

    /// Verdict and explanation. An output without a bracketed label gets one
    /// more try with an explicit instruction.
    pub fn finalize(&self, claim: &Claim, history: &[QaStep]) -> Result<(Verdict, String), EngineError> {
        let prompt = if self.config.predicate_mode {
            self.prompts.render_predicate_reasoner(claim, history)?
        } else {
            self.prompts.render_reasoner(claim, history)?
        };
        match parse_verdict(&self.complete(Role::Reasoner, &prompt)?) {
            Ok(v) => Ok(v),
            Err(first) => {
                log::debug!("claim {}: {first}; asking again", claim.id());
                let retry = prompt.with_note(VERDICT_RETRY_NOTE);
                Ok(parse_verdict(&self.complete(Role::Reasoner, &retry)?)?)
            }
        }
    }
}

fn clean_answer(output: &str) -> String {
    let trimmed = output.trim();
    let stripped = trimmed
        .strip_prefix("Answer:")
        .or_else(|| trimmed.strip_prefix("answer:"))
        .unwrap_or(trimmed);
    stripped.trim().to_string()
}
