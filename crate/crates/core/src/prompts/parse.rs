//! Turning raw model output into typed values.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::claim::{Verdict, VerifierDecision};
use crate::predicate::{Predicate, PredicateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no question found in model output {0:?}")]
    UnparsableQuestion(String),
    #[error("no [SUPPORTED] or [REFUTED] label in model output {0:?}")]
    UnparsableVerdict(String),
    #[error("no predicate found: {0}")]
    UnparsablePredicate(#[from] PredicateError),
}

static QUESTION_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:follow-up\s+)?question(?:\s*\d+)?\s*[=:]").unwrap());

static PREDICATE_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\s*predicate(?:\s*\d+)?\s*:").unwrap());

/// Lines that start a new field in the prompt formats.
static LABEL_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:answer|predicate|claim|prediction|context|explanation|to validate|question|follow-up question)\b")
        .unwrap()
});

static VERDICT_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\s*(supported|refuted)\s*\]").unwrap());

static EXPLANATION_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)explanation\s*:").unwrap());

/// Text of a field that starts right after a marker: the rest of the marker
/// line (or, when that is empty, the next non-empty line) plus any wrapped
/// continuation lines, up to a blank line or the next field label.
fn field_after(text: &str) -> String {
    let mut lines = text.split('\n');
    let mut parts: Vec<&str> = Vec::new();
    let first = lines.next().unwrap_or("").trim();
    if !first.is_empty() {
        parts.push(first);
    }
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if parts.is_empty() {
                continue;
            }
            break;
        }
        if LABEL_LINE.is_match(trimmed) {
            break;
        }
        parts.push(trimmed);
    }
    parts.join(" ")
}

/// Text before the first line that starts a new prompt field.
fn before_first_label(text: &str) -> &str {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if LABEL_LINE.is_match(line) {
            return &text[..offset];
        }
        offset += line.len();
    }
    text
}

/// Extracts a generated question.
///
/// Takes the text after the last `Question =` / `Question N =` /
/// `Question:` / `Follow-up Question:` marker. Without a marker, the last
/// non-empty line is used if it ends with `?` (any continuation the model
/// wrote after the question, such as an `Answer` line, is ignored first).
pub fn parse_question(output: &str) -> Result<String, ParseError> {
    question_span(output).map(|(q, _)| q)
}

/// The question plus the byte offset where its field ends being searched.
fn question_span(output: &str) -> Result<(String, usize), ParseError> {
    if let Some(marker) = QUESTION_MARKER.find_iter(output).last() {
        let question = field_after(&output[marker.end()..]);
        if !question.is_empty() {
            return Ok((question, marker.end()));
        }
    }
    let head = before_first_label(output);
    let last = head.lines().map(str::trim).rfind(|l| !l.is_empty());
    match last {
        Some(line) if line.ends_with('?') => Ok((line.to_string(), 0)),
        _ => Err(ParseError::UnparsableQuestion(output.to_string())),
    }
}

/// Predicate-mode output: a question followed by a `Predicate:` block.
pub fn parse_question_with_predicate(output: &str) -> Result<(String, Predicate), ParseError> {
    let (question, from) = question_span(output)?;
    let rest = &output[from..];
    let predicate = match PREDICATE_MARKER.find(rest) {
        Some(marker) => parse_predicate(&field_after_predicate(&rest[marker.end()..]))?,
        None => rest
            .lines()
            .find_map(|line| Predicate::parse(line).ok())
            .ok_or_else(|| ParseError::UnparsablePredicate(PredicateError::MissingOpenParen(rest.trim().to_string())))?,
    };
    Ok((question, predicate))
}

/// Like [`field_after`] but keeps line breaks so the predicate parser can
/// rejoin wrapped instructions.
fn field_after_predicate(text: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for line in text.split('\n') {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if parts.is_empty() {
                continue;
            }
            break;
        }
        if !parts.is_empty() && LABEL_LINE.is_match(trimmed) {
            break;
        }
        parts.push(trimmed);
    }
    parts.join("\n")
}

/// Total: anything that is not a clear "yes" keeps the loop asking.
pub fn parse_verifier_decision(output: &str) -> VerifierDecision {
    let lower = output.to_lowercase();
    let yes = ["yes, we can know"].iter().filter_map(|p| lower.find(p)).min();
    let no = ["no, we cannot know", "no, we can't know", "no, we can not know"]
        .iter()
        .filter_map(|p| lower.find(p))
        .min();
    match (yes, no) {
        (Some(y), Some(n)) if y < n => VerifierDecision::Enough,
        (Some(_), None) => VerifierDecision::Enough,
        _ => VerifierDecision::NotEnough,
    }
}

/// Verdict from the last bracketed label, explanation from the text after
/// an `Explanation:` marker (or the whole output when there is none).
pub fn parse_verdict(output: &str) -> Result<(Verdict, String), ParseError> {
    let token = VERDICT_TOKEN
        .captures_iter(output)
        .last()
        .ok_or_else(|| ParseError::UnparsableVerdict(output.to_string()))?;
    let verdict = if token[1].eq_ignore_ascii_case("supported") {
        Verdict::Supported
    } else {
        Verdict::Refuted
    };
    let explanation = EXPLANATION_MARKER
        .find_iter(output)
        .last()
        .map(|m| output[m.end()..].trim())
        .filter(|e| !e.is_empty())
        .unwrap_or_else(|| output.trim());
    Ok((verdict, explanation.to_string()))
}

pub fn parse_predicate(output: &str) -> Result<Predicate, ParseError> {
    Ok(Predicate::parse(output)?)
}
