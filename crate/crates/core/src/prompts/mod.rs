//! Prompt rendering for every model call in the loop.
//!
//! Few-shot banks are plain UTF-8 files (see `data/prompts/`). Examples are
//! separated by a line holding only `---`; lines starting with `#` are
//! comments. A [`PromptKit`] loads the built-in banks and, when a directory
//! is given, replaces any bank for which that directory has a file of the
//! same name.

mod parse;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use parse::{
    parse_predicate, parse_question, parse_question_with_predicate, parse_verdict, parse_verifier_decision,
    ParseError,
};

use crate::claim::{Claim, EvidenceSnippet, QaStep};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("step {0} has no predicate")]
    MissingPredicate(u32),
    #[error("no snippets to summarize")]
    NoSnippets,
    #[error("bank file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bank file {0} has no examples")]
    EmptyBank(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    FirstQuestion,
    FollowupQuestion,
    Verifier,
    Reasoner,
    PredicateFirstQuestion,
    PredicateFollowup,
    PredicateReasoner,
    Summarizer,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::FirstQuestion,
        TemplateId::FollowupQuestion,
        TemplateId::Verifier,
        TemplateId::Reasoner,
        TemplateId::PredicateFirstQuestion,
        TemplateId::PredicateFollowup,
        TemplateId::PredicateReasoner,
        TemplateId::Summarizer,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::FirstQuestion => "first_question.txt",
            TemplateId::FollowupQuestion => "followup_question.txt",
            TemplateId::Verifier => "verifier.txt",
            TemplateId::Reasoner => "reasoner.txt",
            TemplateId::PredicateFirstQuestion => "predicate_first.txt",
            TemplateId::PredicateFollowup => "predicate_followup.txt",
            TemplateId::PredicateReasoner => "predicate_reasoner.txt",
            TemplateId::Summarizer => "summarizer.txt",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::FirstQuestion => include_str!("../../data/prompts/first_question.txt"),
            TemplateId::FollowupQuestion => include_str!("../../data/prompts/followup_question.txt"),
            TemplateId::Verifier => include_str!("../../data/prompts/verifier.txt"),
            TemplateId::Reasoner => include_str!("../../data/prompts/reasoner.txt"),
            TemplateId::PredicateFirstQuestion => include_str!("../../data/prompts/predicate_first.txt"),
            TemplateId::PredicateFollowup => include_str!("../../data/prompts/predicate_followup.txt"),
            TemplateId::PredicateReasoner => include_str!("../../data/prompts/predicate_reasoner.txt"),
            TemplateId::Summarizer => include_str!("../../data/prompts/summarizer.txt"),
        }
    }
}

const FIRST_CUE_INTRO: &str = "To validate the above claim, the first simple question we need to ask is:";
const FOLLOWUP_INTRO: &str = "To validate the above claim, we need to ask the following simple questions sequentially:";
const VERIFIER_INTRO: &str = "To validate the above claim, we have asked the following questions:";
const VERIFIER_QUESTION: &str = "Can we know whether the claim is true or false now?";
const PREDICATE_FIRST_INTRO: &str = "To validate the above claim, we need to ask the first question with predicate:";
const PREDICATE_FOLLOWUP_INTRO: &str =
    "To validate the above claim, we need to ask the follow-up question with predicate:";

/// A rendered prompt. The last line is always the open cue the model is
/// expected to complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    text: String,
    template_id: TemplateId,
    cue: String,
}

impl PromptText {
    fn new(template_id: TemplateId, body: String, cue: impl Into<String>) -> Self {
        let cue = cue.into();
        Self {
            text: format!("{body}\n{cue}"),
            template_id,
            cue,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn into_text(self) -> String {
        self.text
    }

    pub fn template_id(&self) -> TemplateId {
        self.template_id
    }

    pub fn cue(&self) -> &str {
        &self.cue
    }

    /// Number of lines equal to the cue that are not followed by content.
    /// Few-shot examples reuse the cue label with an answer on the next
    /// line, so only the trailing open slot should count.
    pub fn open_cue_count(&self) -> usize {
        let lines: Vec<&str> = self.text.lines().collect();
        lines
            .iter()
            .enumerate()
            .filter(|(i, line)| {
                line.trim_end() == self.cue && lines.get(i + 1).is_none_or(|next| next.trim().is_empty())
            })
            .count()
    }

    /// Inserts `note` on its own line just before the trailing cue.
    pub fn with_note(&self, note: &str) -> PromptText {
        let body = &self.text[..self.text.len() - self.cue.len()];
        PromptText {
            text: format!("{body}{}\n{}", one_line(note), self.cue),
            template_id: self.template_id,
            cue: self.cue.clone(),
        }
    }
}

/// Collapses all whitespace runs (including newlines) to single spaces.
pub(crate) fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_bank(raw: &str) -> Vec<String> {
    let mut examples = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut flush = |current: &mut Vec<&str>| {
        let joined = current.join("\n");
        let trimmed = joined.trim_matches('\n').to_string();
        if !trimmed.trim().is_empty() {
            examples.push(trimmed);
        }
        current.clear();
    };
    for line in raw.lines() {
        if line.starts_with('#') {
            continue;
        }
        if line.trim_end() == "---" {
            flush(&mut current);
        } else {
            current.push(line.trim_end());
        }
    }
    flush(&mut current);
    examples
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptKit {
    first_question: Vec<String>,
    followup_question: Vec<String>,
    verifier: Vec<String>,
    reasoner: Vec<String>,
    predicate_first: Vec<String>,
    predicate_followup: Vec<String>,
    predicate_reasoner: Vec<String>,
    summarizer_instruction: String,
}

impl Default for PromptKit {
    fn default() -> Self {
        Self::from_sources(|id| Ok(id.builtin().to_string())).expect("built-in banks are valid")
    }
}

impl PromptKit {
    /// Built-in banks, with any file in `dir` taking precedence.
    pub fn load(dir: Option<&Path>) -> Result<Self, PromptError> {
        Self::from_sources(|id| match dir {
            Some(dir) => {
                let path = dir.join(id.file_name());
                if path.exists() {
                    fs::read_to_string(&path).map_err(|source| PromptError::Io {
                        path: path.display().to_string(),
                        source,
                    })
                } else {
                    Ok(id.builtin().to_string())
                }
            }
            None => Ok(id.builtin().to_string()),
        })
    }

    fn from_sources(mut read: impl FnMut(TemplateId) -> Result<String, PromptError>) -> Result<Self, PromptError> {
        let mut bank = |id: TemplateId| -> Result<Vec<String>, PromptError> {
            let examples = parse_bank(&read(id)?);
            if examples.is_empty() {
                return Err(PromptError::EmptyBank(id.file_name().to_string()));
            }
            Ok(examples)
        };
        Ok(Self {
            first_question: bank(TemplateId::FirstQuestion)?,
            followup_question: bank(TemplateId::FollowupQuestion)?,
            verifier: bank(TemplateId::Verifier)?,
            reasoner: bank(TemplateId::Reasoner)?,
            predicate_first: bank(TemplateId::PredicateFirstQuestion)?,
            predicate_followup: bank(TemplateId::PredicateFollowup)?,
            predicate_reasoner: bank(TemplateId::PredicateReasoner)?,
            summarizer_instruction: bank(TemplateId::Summarizer)?.join("\n\n"),
        })
    }

    pub fn bank(&self, id: TemplateId) -> &[String] {
        match id {
            TemplateId::FirstQuestion => &self.first_question,
            TemplateId::FollowupQuestion => &self.followup_question,
            TemplateId::Verifier => &self.verifier,
            TemplateId::Reasoner => &self.reasoner,
            TemplateId::PredicateFirstQuestion => &self.predicate_first,
            TemplateId::PredicateFollowup => &self.predicate_followup,
            TemplateId::PredicateReasoner => &self.predicate_reasoner,
            TemplateId::Summarizer => std::slice::from_ref(&self.summarizer_instruction),
        }
    }

    fn with_bank(&self, id: TemplateId, target: String) -> String {
        let mut text = self.bank(id).join("\n\n");
        text.push_str("\n\n");
        text.push_str(&target);
        text
    }

    pub fn render_first_question(&self, claim: &Claim) -> PromptText {
        let target = format!("Claim = {}\n{FIRST_CUE_INTRO}", one_line(claim.text()));
        PromptText::new(
            TemplateId::FirstQuestion,
            self.with_bank(TemplateId::FirstQuestion, target),
            "Question =",
        )
    }

    pub fn render_followup_question(&self, claim: &Claim, history: &[QaStep]) -> Result<PromptText, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let target = format!(
            "Claim = {}\n{FOLLOWUP_INTRO}\n{}",
            one_line(claim.text()),
            numbered_pairs(history)
        );
        Ok(PromptText::new(
            TemplateId::FollowupQuestion,
            self.with_bank(TemplateId::FollowupQuestion, target),
            format!("Question {} =", history.len() + 1),
        ))
    }

    pub fn render_verifier(&self, claim: &Claim, history: &[QaStep]) -> Result<PromptText, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let target = format!(
            "Claim = {}\n{VERIFIER_INTRO}\n{}\n{VERIFIER_QUESTION}",
            one_line(claim.text()),
            numbered_pairs(history)
        );
        Ok(PromptText::new(
            TemplateId::Verifier,
            self.with_bank(TemplateId::Verifier, target),
            "Prediction =",
        ))
    }

    /// Final verdict prompt without predicates.
    pub fn render_reasoner(&self, claim: &Claim, history: &[QaStep]) -> Result<PromptText, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let target = format!(
            "Question:\nIs it true that {}?\nContext:\n{}",
            one_line(claim.text()),
            context_pairs(history)
        );
        Ok(PromptText::new(
            TemplateId::Reasoner,
            self.with_bank(TemplateId::Reasoner, target),
            "Prediction:",
        ))
    }

    pub fn render_predicate_first(&self, claim: &Claim) -> PromptText {
        let target = format!("Claim: {}\n\n{PREDICATE_FIRST_INTRO}", one_line(claim.text()));
        PromptText::new(
            TemplateId::PredicateFirstQuestion,
            self.with_bank(TemplateId::PredicateFirstQuestion, target),
            "Question:",
        )
    }

    pub fn render_predicate_followup(&self, claim: &Claim, history: &[QaStep]) -> Result<PromptText, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let mut target = format!("Claim: {}\n\n", one_line(claim.text()));
        for step in history {
            let predicate = step.predicate.as_ref().ok_or(PromptError::MissingPredicate(step.index))?;
            target.push_str(&format!(
                "Question {i}:\n{q}\nPredicate {i}:\n{p}\nAnswer {i}:\n{a}\n",
                i = step.index,
                q = one_line(&step.question),
                p = one_line(&predicate.to_string()),
                a = one_line(step.rendered_answer()),
            ));
        }
        target.push('\n');
        target.push_str(PREDICATE_FOLLOWUP_INTRO);
        Ok(PromptText::new(
            TemplateId::PredicateFollowup,
            self.with_bank(TemplateId::PredicateFollowup, target),
            "Follow-up Question:",
        ))
    }

    /// Final verdict prompt listing one predicate line per step, in order.
    pub fn render_predicate_reasoner(&self, claim: &Claim, history: &[QaStep]) -> Result<PromptText, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let predicate_lines = history
            .iter()
            .map(|step| {
                step.predicate
                    .as_ref()
                    .map(|p| one_line(&p.to_string()))
                    .ok_or(PromptError::MissingPredicate(step.index))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let target = format!(
            "Question:\nIs it true that {}?\nContext:\n{}\n\n{}",
            one_line(claim.text()),
            predicate_lines.join("\n"),
            context_pairs(history)
        );
        Ok(PromptText::new(
            TemplateId::PredicateReasoner,
            self.with_bank(TemplateId::PredicateReasoner, target),
            "Prediction:",
        ))
    }

    pub fn render_summarizer(&self, question: &str, snippets: &[EvidenceSnippet]) -> Result<PromptText, PromptError> {
        if snippets.is_empty() {
            return Err(PromptError::NoSnippets);
        }
        let mut body = format!(
            "{}\n\nQuestion: {}\nSearch results:",
            self.summarizer_instruction,
            one_line(question)
        );
        for snippet in snippets {
            body.push_str(&format!("\n[{}] {}", snippet.rank, snippet.text));
        }
        Ok(PromptText::new(TemplateId::Summarizer, body, "Answer:"))
    }
}

fn numbered_pairs(history: &[QaStep]) -> String {
    history
        .iter()
        .map(|step| {
            format!(
                "Question {i} = {q}\nAnswer {i} = {a}",
                i = step.index,
                q = one_line(&step.question),
                a = one_line(step.rendered_answer())
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn context_pairs(history: &[QaStep]) -> String {
    history
        .iter()
        .map(|step| format!("{} {}", one_line(&step.question), one_line(step.rendered_answer())))
        .collect::<Vec<_>>()
        .join("\n")
}
