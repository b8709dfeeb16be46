//! Step-by-step claim verification.
//!
//! A claim is checked by repeatedly generating a simple question, gathering
//! evidence for it (web search snippets or the model's own knowledge),
//! summarizing that evidence and asking a verifier whether enough is known.
//! Once it is, or once the question cap is reached, a reasoner produces a
//! binary verdict with an explanation. Every step is recorded in a
//! [`VerificationTrace`].

pub mod claim;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod evaluation;
pub mod evidence;
mod fsutil;
pub mod gateway;
pub mod predicate;
pub mod prompts;
pub mod retry;
pub mod trace;

pub use claim::{Claim, ClaimError, EvidenceSnippet, QaStep, SourceKind, Verdict, VerifierDecision, NO_EVIDENCE_ANSWER};
pub use config::{fingerprint, Role, RoleOverrides, RunConfig};
pub use corpus::{DatasetFormat, LabeledClaim};
pub use engine::{ClaimAborted, Engine, EngineError};
pub use evaluation::{confusion, precision_recall_f1, ConfusionCounts, Metrics};
pub use evidence::Retriever;
pub use gateway::Gateway;
pub use predicate::{Predicate, PredicateError};
pub use prompts::PromptKit;
pub use trace::{StepTiming, VerificationTrace, TRACE_SCHEMA};
