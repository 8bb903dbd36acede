//! Plain-completion prompt templates.
//!
//! Every statement is posed as a question by dropping trailing sentence
//! punctuation and appending `?`. Demonstrations are separated by a blank line.

use crate::types::{Answer, PromptMode, PromptSet};

use super::LmError;

/// Text preceding the answer token in explanation-first prompts.
pub const ANSWER_CUE: &str = " So the answer is";

const NEGATION_PREFIX: &str = "It is wrong to say that";

pub fn as_question(statement: &str) -> String {
    let trimmed = statement
        .trim()
        .trim_end_matches(['.', '?', '!'])
        .trim_end();
    format!("{trimmed}?")
}

fn require(prompts: &PromptSet, mode: PromptMode) -> Result<(), LmError> {
    if prompts.mode() == mode {
        Ok(())
    } else {
        Err(LmError::InvalidRequest(format!(
            "prompt set has mode {:?}, expected {mode:?}",
            prompts.mode()
        )))
    }
}

/// `{q}? {answer}` demonstrations followed by `{statement}?`.
pub fn render_truth(prompts: &PromptSet, statement: &str) -> Result<String, LmError> {
    require(prompts, PromptMode::QaPairs)?;
    let mut out = String::new();
    for ex in prompts.examples() {
        out.push_str(&format!("{} {}\n\n", as_question(&ex.question), ex.answer));
    }
    out.push_str(&as_question(statement));
    Ok(out)
}

/// `{q}? {answer}, because {e}` demonstrations followed by
/// `{question}? {label}, because`.
pub fn render_abductive(
    prompts: &PromptSet,
    question: &str,
    label: Answer,
) -> Result<String, LmError> {
    require(prompts, PromptMode::AbductiveTriples)?;
    let mut out = String::new();
    for ex in prompts.examples() {
        out.push_str(&format!(
            "{} {}, because {}\n\n",
            as_question(&ex.question),
            ex.answer,
            ex.explanation.as_deref().unwrap_or_default().trim()
        ));
    }
    out.push_str(&format!("{} {label}, because", as_question(question)));
    Ok(out)
}

fn explanation_demos(prompts: &PromptSet) -> Result<String, LmError> {
    require(prompts, PromptMode::QaExplanationTriples)?;
    let mut out = String::new();
    for ex in prompts.examples() {
        out.push_str(&format!(
            "{} {}{ANSWER_CUE} {}.\n\n",
            as_question(&ex.question),
            ex.explanation.as_deref().unwrap_or_default().trim(),
            ex.answer
        ));
    }
    Ok(out)
}

/// Explanation-first demonstrations followed by `{question}?`.
pub fn render_explanation_query(prompts: &PromptSet, question: &str) -> Result<String, LmError> {
    let mut out = explanation_demos(prompts)?;
    out.push_str(&as_question(question));
    Ok(out)
}

/// Explanation-first demonstrations followed by
/// `{question}? {explanation} So the answer is`.
pub fn render_explained_answer(
    prompts: &PromptSet,
    question: &str,
    explanation: &str,
) -> Result<String, LmError> {
    let mut out = explanation_demos(prompts)?;
    out.push_str(&format!(
        "{} {}{ANSWER_CUE}",
        as_question(question),
        explanation.trim()
    ));
    Ok(out)
}

/// Prompt asking the model to negate `statement`.
pub fn render_negation(statement: &str) -> String {
    format!(
        "Negate each statement.\n\n\
         Statement: Ice is cold.\nNegation: Ice is not cold.\n\n\
         Statement: Birds can fly.\nNegation: Birds cannot fly.\n\n\
         Statement: {}\nNegation:",
        statement.trim()
    )
}

/// `It is wrong to say that {statement}` with the first letter lowercased.
pub fn prefix_negation(statement: &str) -> String {
    let s = statement.trim();
    let mut chars = s.chars();
    let lowered = match chars.next() {
        Some(first) => first.to_lowercase().chain(chars).collect::<String>(),
        None => String::new(),
    };
    format!("{NEGATION_PREFIX} {lowered}")
}
