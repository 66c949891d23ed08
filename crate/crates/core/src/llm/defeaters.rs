//! Defeater generation prompts and candidate extraction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{PromptRequest, Settings};
use crate::model::{DefeaterKind, EaArgument, ElementKind, ModelError};
use crate::rules::{check_text, RULE_LIBRARY};
use crate::text::serialize;

pub const GENERATION_SYSTEM_PROMPT: &str = "You are an assistant that helps me find defeaters in assurance cases written in Eliminative Argumentation. A defeater is a doubt that challenges a claim, a piece of evidence or an inference rule. Follow the requested answer format exactly.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOptions {
    pub chain_of_thought: bool,
    pub rule_library: bool,
    pub n_candidates: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            chain_of_thought: true,
            rule_library: true,
            n_candidates: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("unknown element id `{0}`")]
    UnknownId(String),
    #[error("a {kind} defeater cannot target {target_kind} `{target}`")]
    KindMismatch {
        target: String,
        target_kind: ElementKind,
        kind: DefeaterKind,
    },
    #[error("candidate count must be at least 1")]
    NoCandidatesRequested,
    #[error("response contains no numbered defeaters")]
    EmptyResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Proposed,
    Accepted,
    Refined,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefeaterCandidate {
    pub id: String,
    pub target_element: String,
    pub kind: DefeaterKind,
    pub text: String,
    pub rationale: String,
    pub status: CandidateStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_text: Option<String>,
}

impl DefeaterCandidate {
    /// Text that ends up in the argument: the refined text when present.
    pub fn effective_text(&self) -> &str {
        self.refined_text.as_deref().unwrap_or(&self.text)
    }
}

fn describe(kind: DefeaterKind) -> &'static str {
    match kind {
        DefeaterKind::Rebutting => "A rebutting defeater gives a reason why the claim might be false.",
        DefeaterKind::Undermining => {
            "An undermining defeater gives a reason why the evidence might be unreliable, challenging the validity of its data."
        }
        DefeaterKind::Undercutting => {
            "An undercutting defeater points out a flaw in the inference rule, so that its premises holding would not guarantee its conclusion."
        }
    }
}

/// Checks that `kind` may challenge element `target` of `arg`.
pub fn check_target(
    arg: &EaArgument,
    target: &str,
    kind: DefeaterKind,
) -> Result<ElementKind, GenerationError> {
    let element = arg
        .element(target)
        .ok_or_else(|| GenerationError::UnknownId(target.to_string()))?;
    if kind.target_kind() != element.kind {
        return Err(GenerationError::KindMismatch {
            target: target.to_string(),
            target_kind: element.kind,
            kind,
        });
    }
    Ok(element.kind)
}

pub fn build_defeater_prompt(
    arg: &EaArgument,
    target: &str,
    kind: DefeaterKind,
    options: &GenerationOptions,
    settings: &Settings,
) -> Result<PromptRequest, GenerationError> {
    let target_kind = check_target(arg, target, kind)?;
    if options.n_candidates == 0 {
        return Err(GenerationError::NoCandidatesRequested);
    }
    let element = arg.element(target).expect("checked above");
    let n = options.n_candidates;
    let mut user = String::new();
    user.push_str(
        "The assurance case below is written in Eliminative Argumentation structured prose. \
         Each line `ID [Kind]: text` declares an element, `A -> B` makes B a child of A, \
         and `ID ! AssumedOK` or `ID ! IsOK` marks an argument terminator.\n\n",
    );
    user.push_str("---\n");
    user.push_str(&serialize(arg));
    user.push_str("---\n\n");
    let _ = writeln!(
        user,
        "Target: {} [{}]: {}",
        element.id,
        target_kind.short_name(),
        element.text
    );
    let _ = writeln!(
        user,
        "Task: propose {n} {kind} defeater{} for {}. {}",
        if n == 1 { "" } else { "s" },
        element.id,
        describe(kind)
    );
    user.push_str("\nRequirements:\n");
    let _ = writeln!(
        user,
        "- each defeater must begin with \"{}\"",
        kind.required_prefix()
    );
    user.push_str("- each defeater must be a single sentence on a single line\n");
    let _ = writeln!(
        user,
        "- do not repeat a defeater already attached to {}",
        element.id
    );

    if options.rule_library {
        user.push_str("\nRule library:\n");
        for (i, rule) in RULE_LIBRARY.iter().enumerate() {
            let _ = writeln!(user, "Rule {}. {rule}", i + 1);
        }
    }

    user.push('\n');
    if options.chain_of_thought {
        let _ = writeln!(
            user,
            "Think step by step. Answer with a numbered list of exactly {n} items (\"1.\", \"2.\", ...). \
             In each item, first state your reasoning on a line starting with \"Reasoning:\", \
             then give the defeater on a line starting with \"Defeater:\"."
        );
    } else {
        let _ = writeln!(
            user,
            "Answer with a numbered list of exactly {n} items (\"1.\", \"2.\", ...), one defeater per item and nothing else."
        );
    }
    Ok(PromptRequest::new(GENERATION_SYSTEM_PROMPT, user, settings))
}

/// Splits `"12. rest"` / `"12) rest"` into the item body.
fn list_item(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let digits = trimmed.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &trimmed[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    (rest.is_empty() || rest.starts_with(char::is_whitespace)).then(|| rest.trim())
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let line = line.trim_start_matches(['*', '-', ' ']);
    let head = line.get(..label.len())?;
    if head.eq_ignore_ascii_case(label) {
        Some(line[label.len()..].trim_start_matches(['*', ' ']).trim())
    } else {
        None
    }
}

fn clean_text(s: &str) -> String {
    let collapsed: String = s
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .trim_matches(|c: char| c == '"' || c == '\u{201C}' || c == '\u{201D}')
        .trim()
        .to_string()
}

/// Extracts numbered-list items as Proposed candidates with local ids `c1`, `c2`, ...
///
/// Items whose text breaks the kind's prefix rule are kept, with the lint
/// finding appended to the rationale.
pub fn parse_defeater_response(
    text: &str,
    kind: DefeaterKind,
    target: &str,
) -> Result<Vec<DefeaterCandidate>, GenerationError> {
    let mut items: Vec<Vec<&str>> = Vec::new();
    for line in text.lines() {
        if let Some(body) = list_item(line) {
            items.push(vec![body]);
        } else if let Some(current) = items.last_mut() {
            if !line.trim().is_empty() {
                current.push(line.trim());
            }
        }
    }

    let mut out = Vec::new();
    for lines in items {
        let mut reasoning = Vec::new();
        let mut defeater = Vec::new();
        let mut labelled = None;
        for line in lines {
            if let Some(r) = strip_label(line, "Reasoning:") {
                reasoning.push(r);
            } else if let Some(d) = strip_label(line, "Defeater:") {
                labelled = Some(d);
            } else {
                defeater.push(line);
            }
        }
        let body = match labelled {
            Some(d) => clean_text(d),
            None => clean_text(&defeater.join(" ")),
        };
        if body.is_empty() {
            continue;
        }
        let mut rationale = clean_text(&reasoning.join(" "));
        for finding in check_text(kind.element_kind(), &body) {
            if !rationale.is_empty() {
                rationale.push(' ');
            }
            let _ = write!(rationale, "[lint {}] {}", finding.code, finding.message);
        }
        out.push(DefeaterCandidate {
            id: format!("c{}", out.len() + 1),
            target_element: target.to_string(),
            kind,
            text: body,
            rationale,
            status: CandidateStatus::Proposed,
            refined_text: None,
        });
    }
    if out.is_empty() {
        return Err(GenerationError::EmptyResponse);
    }
    Ok(out)
}

/// Adds `text` as a new defeater element under `target`; returns the new id.
pub fn graft_defeater(
    arg: &mut EaArgument,
    target: &str,
    kind: DefeaterKind,
    text: &str,
) -> Result<String, ModelError> {
    let id = arg.fresh_id(kind.id_prefix());
    arg.add_element(&id, kind.element_kind(), text)?;
    if let Err(e) = arg.connect(target, &id) {
        arg.remove_element(&id).expect("just added");
        return Err(e);
    }
    Ok(id)
}
