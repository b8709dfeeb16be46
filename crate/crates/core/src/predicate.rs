//! `Verb(arg, arg, ...) ::: instruction` predicates.
//!
//! The canonical rendering is `verb(arg1, arg2)` optionally followed by
//! ` ::: instruction`. Arguments keep their internal spaces; only the
//! whitespace around each argument is dropped when parsing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const INSTRUCTION_SEPARATOR: &str = ":::";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("no opening parenthesis in {0:?}")]
    MissingOpenParen(String),
    #[error("unbalanced parentheses in {0:?}")]
    MissingCloseParen(String),
    #[error("empty verb in {0:?}")]
    EmptyVerb(String),
    #[error("empty argument in {0:?}")]
    EmptyArgument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub verb: String,
    pub arguments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

impl Predicate {
    pub fn new<I, S>(verb: impl Into<String>, arguments: I, instruction: Option<String>) -> Result<Self, PredicateError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let verb = verb.into().trim().to_string();
        let arguments: Vec<String> = arguments
            .into_iter()
            .map(|a| a.into().trim().to_string())
            .collect();
        let shown = || format!("{verb}({})", arguments.join(", "));
        if verb.is_empty() {
            return Err(PredicateError::EmptyVerb(shown()));
        }
        if arguments.is_empty() || arguments.iter().any(String::is_empty) {
            return Err(PredicateError::EmptyArgument(shown()));
        }
        let instruction = instruction
            .map(|i| i.trim().to_string())
            .filter(|i| !i.is_empty());
        Ok(Self {
            verb,
            arguments,
            instruction,
        })
    }

    /// `verb(arg1, arg2)` without the instruction.
    pub fn head(&self) -> String {
        format!("{}({})", self.verb, self.arguments.join(", "))
    }

    pub fn parse(text: &str) -> Result<Self, PredicateError> {
        parse(text)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.head())?;
        if let Some(instruction) = &self.instruction {
            write!(f, " {INSTRUCTION_SEPARATOR} {instruction}")?;
        }
        Ok(())
    }
}

impl FromStr for Predicate {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn parse(text: &str) -> Result<Predicate, PredicateError> {
    let text = text.trim();
    let open = text
        .find('(')
        .ok_or_else(|| PredicateError::MissingOpenParen(text.to_string()))?;
    let verb = text[..open].trim();
    if verb.is_empty() {
        return Err(PredicateError::EmptyVerb(text.to_string()));
    }

    let mut depth = 0usize;
    let mut close = None;
    let mut arguments = Vec::new();
    let mut start = open + 1;
    for (offset, ch) in text[open..].char_indices() {
        let at = open + offset;
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    arguments.push(&text[start..at]);
                    close = Some(at);
                    break;
                }
            }
            ',' if depth == 1 => {
                arguments.push(&text[start..at]);
                start = at + 1;
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(|| PredicateError::MissingCloseParen(text.to_string()))?;

    let arguments: Vec<String> = arguments
        .into_iter()
        .map(|a| collapse_newlines(a.trim()))
        .collect();
    if arguments.iter().any(String::is_empty) {
        return Err(PredicateError::EmptyArgument(text.to_string()));
    }

    let rest = &text[close + 1..];
    let instruction = rest
        .find(INSTRUCTION_SEPARATOR)
        .map(|at| collapse_newlines(rest[at + INSTRUCTION_SEPARATOR.len()..].trim()))
        .filter(|i| !i.is_empty());

    Ok(Predicate {
        verb: collapse_newlines(verb),
        arguments,
        instruction,
    })
}

/// Joins hard-wrapped lines with a single space; other whitespace is kept.
fn collapse_newlines(text: &str) -> String {
    if !text.contains('\n') {
        return text.to_string();
    }
    text.split('\n')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_genre_example() {
        let p = Predicate::parse("Genre(Superdrag, rock) ::: Verify Superdrag is a rock band").unwrap();
        assert_eq!(p.verb, "Genre");
        assert_eq!(p.arguments, vec!["Superdrag", "rock"]);
        assert_eq!(p.instruction.as_deref(), Some("Verify Superdrag is a rock band"));
    }

    #[test]
    fn keeps_multi_word_arguments() {
        let p = Predicate::parse(
            "Challenged(player, WBO lightweight title in 1995) ::: Verify name of the \nprofessional boxer that challenged for the WBO lightweight title in 1995.",
        )
        .unwrap();
        assert_eq!(p.arguments[1], "WBO lightweight title in 1995");
        assert_eq!(
            p.instruction.as_deref(),
            Some("Verify name of the professional boxer that challenged for the WBO lightweight title in 1995.")
        );
    }

    #[test]
    fn no_instruction_is_none() {
        let p = Predicate::parse("Treats(aspirin, headache)").unwrap();
        assert_eq!(p.instruction, None);
        assert_eq!(p.to_string(), "Treats(aspirin, headache)");
    }

    #[test]
    fn nested_parentheses_stay_in_argument() {
        let p = Predicate::parse("Treats(aspirin (ASA), tension headache)").unwrap();
        assert_eq!(p.arguments, vec!["aspirin (ASA)", "tension headache"]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            Predicate::parse("Treats aspirin headache"),
            Err(PredicateError::MissingOpenParen(_))
        ));
        assert!(matches!(Predicate::parse("Treats(aspirin"), Err(PredicateError::MissingCloseParen(_))));
        assert!(matches!(Predicate::parse("(a, b)"), Err(PredicateError::EmptyVerb(_))));
        assert!(matches!(Predicate::parse("Has(a, )"), Err(PredicateError::EmptyArgument(_))));
        assert!(matches!(Predicate::parse("Has()"), Err(PredicateError::EmptyArgument(_))));
    }

    fn field() -> impl Strategy<Value = String> {
        // no reserved characters, no leading/trailing spaces
        "[A-Za-z0-9][A-Za-z0-9 .'-]{0,20}[A-Za-z0-9]|[A-Za-z0-9]"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn render_parse_round_trip(
            verb in "[A-Z][A-Za-z]{0,12}",
            args in proptest::collection::vec(field(), 1..5),
            instruction in proptest::option::of(field()),
        ) {
            let p = Predicate::new(verb, args, instruction).unwrap();
            let rendered = p.to_string();
            let parsed = Predicate::parse(&rendered).unwrap();
            prop_assert_eq!(&parsed, &p);
            prop_assert_eq!(parsed.to_string(), rendered);
        }
    }
}
