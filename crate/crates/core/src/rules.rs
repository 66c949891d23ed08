//! Rule engine for the notation's structural and semantic rules.
//!
//! Catalog:
//!
//! | code | severity | rule |
//! |------|----------|------|
//! | S001 | error    | edge between element kinds that may not be connected |
//! | S002 | error    | terminator attached to an element kind that does not take it |
//! | S003 | warning  | element other than a claim has no parent |
//! | M001 | warning  | rebutting defeater does not begin with "Unless" |
//! | M002 | warning  | undercutting defeater does not begin with "Unless" |
//! | M003 | warning  | undermining defeater does not begin with "But" |
//! | M004 | warning  | evidence is not of the form "... showing P" |
//! | M005 | warning  | claim is not a bare predicate |
//! | M006 | warning  | inference rule states no implication |
//!
//! Adjacency is the symmetric closure of every "connected to" entry: an edge
//! is legal when either endpoint's row lists the other. Strategy is not in
//! the original rule table; it may neighbor claims and all three defeater
//! kinds.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{EaArgument, ElementKind, TerminatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

/// What a diagnostic points at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    Element(String),
    Edge(String, String),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Element(id) => f.write_str(id),
            Subject::Edge(p, c) => write!(f, "{p}->{c}"),
        }
    }
}

impl Serialize for Subject {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub subject: Subject,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &'static str, subject: Subject, message: String) -> Self {
        let severity = if code.starts_with('S') && code != "S003" {
            Severity::Error
        } else {
            Severity::Warning
        };
        Diagnostic {
            code,
            severity,
            subject,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn is_structural(&self) -> bool {
        self.code.starts_with('S')
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostic serializes")
    }
}

/// Kinds each kind is listed as "connected to", row by row.
fn listed_neighbors(kind: ElementKind) -> &'static [ElementKind] {
    use ElementKind::*;
    match kind {
        Claim => &[Context, RebuttingDefeater],
        Evidence => &[
            RebuttingDefeater,
            UnderminingDefeater,
            UndercuttingDefeater,
            InferenceRule,
            Evidence,
        ],
        Context => &[Claim],
        InferenceRule => &[
            RebuttingDefeater,
            UnderminingDefeater,
            UndercuttingDefeater,
            Claim,
            Evidence,
        ],
        UndercuttingDefeater => &[InferenceRule],
        UnderminingDefeater => &[Evidence],
        RebuttingDefeater => &[Claim],
        Strategy => &[
            Claim,
            RebuttingDefeater,
            UnderminingDefeater,
            UndercuttingDefeater,
        ],
    }
}

/// Whether an edge between the two kinds is legal, in either direction.
pub fn may_connect(a: ElementKind, b: ElementKind) -> bool {
    listed_neighbors(a).contains(&b) || listed_neighbors(b).contains(&a)
}

/// Strips leading whitespace and quotation marks.
fn strip_leading_noise(text: &str) -> &str {
    text.trim_start_matches(|c: char| {
        c.is_whitespace()
            || matches!(
                c,
                '"' | '\'' | '`' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{2019}'
            )
    })
}

fn first_word(text: &str) -> &str {
    strip_leading_noise(text)
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(|w| {
        w.trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase()
    })
}

fn has_token(text: &str, token: &str) -> bool {
    tokens(text).any(|t| t == token)
}

/// Semantic (M-code) checks on a single element's text.
pub fn check_text(kind: ElementKind, text: &str) -> Vec<Diagnostic> {
    check_text_for(kind, text, "")
}

fn check_text_for(kind: ElementKind, text: &str, id: &str) -> Vec<Diagnostic> {
    use ElementKind::*;
    let subject = || Subject::Element(id.to_string());
    let word = first_word(text);
    let finding = match kind {
        RebuttingDefeater if word != "Unless" => Some((
            "M001",
            "rebutting defeater must begin with \"Unless\"".to_string(),
        )),
        UndercuttingDefeater if word != "Unless" => Some((
            "M002",
            "undercutting defeater must begin with \"Unless\"".to_string(),
        )),
        UnderminingDefeater if word != "But" => Some((
            "M003",
            "undermining defeater must begin with \"But\"".to_string(),
        )),
        Evidence if !has_token(text, "showing") => Some((
            "M004",
            "evidence should read \"[noun phrase] showing P\"".to_string(),
        )),
        Claim if word == "Unless" || word == "But" || text.trim_end().ends_with('?') => Some((
            "M005",
            "claim should be a bare predicate, not a question or a defeater".to_string(),
        )),
        InferenceRule
            if !((has_token(text, "if") && has_token(text, "then"))
                || has_token(text, "implies")
                || text.contains('\u{2192}')) =>
        {
            Some((
                "M006",
                "inference rule should state an implication (if P then Q, P implies Q, P \u{2192} Q)"
                    .to_string(),
            ))
        }
        _ => None,
    };
    finding
        .map(|(code, message)| vec![Diagnostic::new(code, subject(), message)])
        .unwrap_or_default()
}

/// Every rule violation in `arg`, ordered by code then subject.
pub fn validate(arg: &EaArgument) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for (p, c) in arg.edges() {
        let (pk, ck) = (arg.element(p).unwrap().kind, arg.element(c).unwrap().kind);
        if !may_connect(pk, ck) {
            out.push(Diagnostic::new(
                "S001",
                Subject::Edge(p.clone(), c.clone()),
                format!("{pk} may not be connected to {ck}"),
            ));
        }
    }

    for el in arg.elements() {
        if let Some(t) = el.terminator {
            if !t.attaches_to(el.kind) {
                out.push(Diagnostic::new(
                    "S002",
                    Subject::Element(el.id.clone()),
                    format!("{t} cannot be attached to {}", el.kind),
                ));
            }
        }
        if el.kind != ElementKind::Claim && arg.parents(&el.id).next().is_none() {
            out.push(Diagnostic::new(
                "S003",
                Subject::Element(el.id.clone()),
                format!("{} `{}` is not attached to any parent", el.kind, el.id),
            ));
        }
        out.extend(check_text_for(el.kind, &el.text, &el.id));
    }

    out.sort_by(|a, b| a.code.cmp(b.code).then_with(|| a.subject.cmp(&b.subject)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub uncovered_claims: Vec<String>,
    pub uncovered_evidence: Vec<String>,
    pub uncovered_rules: Vec<String>,
    pub unresolved_defeaters: Vec<String>,
    pub resolution_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error("argument has {} structural error(s); coverage is undefined", .0.len())]
    PreconditionViolated(Vec<Diagnostic>),
}

/// Which elements lack a challenging defeater and which defeaters remain open.
pub fn coverage(arg: &EaArgument) -> Result<CoverageReport, CoverageError> {
    let errors: Vec<_> = validate(arg)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if !errors.is_empty() {
        return Err(CoverageError::PreconditionViolated(errors));
    }

    let has_child_of = |id: &str, kind: ElementKind| {
        arg.children(id)
            .any(|c| arg.element(c).map(|e| e.kind) == Some(kind))
    };
    let mut claims = BTreeSet::new();
    let mut evidence = BTreeSet::new();
    let mut rules = BTreeSet::new();
    let mut unresolved = BTreeSet::new();
    let (mut total, mut resolved) = (0usize, 0usize);

    for el in arg.elements() {
        match el.kind {
            ElementKind::Claim if !has_child_of(&el.id, ElementKind::RebuttingDefeater) => {
                claims.insert(el.id.clone());
            }
            ElementKind::Evidence if !has_child_of(&el.id, ElementKind::UnderminingDefeater) => {
                evidence.insert(el.id.clone());
            }
            ElementKind::InferenceRule
                if !has_child_of(&el.id, ElementKind::UndercuttingDefeater) =>
            {
                rules.insert(el.id.clone());
            }
            k if k.is_defeater() => {
                total += 1;
                if el.terminator.is_some() || arg.children(&el.id).next().is_some() {
                    resolved += 1;
                } else {
                    unresolved.insert(el.id.clone());
                }
            }
            _ => {}
        }
    }

    Ok(CoverageReport {
        uncovered_claims: claims.into_iter().collect(),
        uncovered_evidence: evidence.into_iter().collect(),
        uncovered_rules: rules.into_iter().collect(),
        unresolved_defeaters: unresolved.into_iter().collect(),
        resolution_ratio: if total == 0 {
            1.0
        } else {
            resolved as f64 / total as f64
        },
    })
}

/// One predicate-form sentence per row of the rule table, used as a static
/// rule library in generation prompts.
pub const RULE_LIBRARY: [&str; 9] = [
    "IF x is a claim THEN x connects only to contexts and rebutting defeaters AND the text of x is a predicate (a true or false statement).",
    "IF x is evidence THEN x connects only to rebutting defeaters, undermining defeaters, undercutting defeaters, inference rules and evidence AND the text of x has the form \"[noun phrase] showing P\" where P interprets data relevant to the argument.",
    "IF x is a context THEN x connects only to claims AND x gives optional additional information about the element it annotates.",
    "IF x is an inference rule THEN x connects only to rebutting defeaters, undermining defeaters, undercutting defeaters, claims and evidence AND the text of x is a predicate P \u{2192} Q where exactly one of P or Q is an eliminated defeater.",
    "IF x is an undercutting defeater THEN x connects only to an inference rule AND the text of x begins with \"Unless\" AND x doubts the validity of that inference rule.",
    "IF x is an undermining defeater THEN x connects only to evidence AND the text of x begins with \"But\" AND x challenges the validity of the data comprising that evidence.",
    "IF x is a rebutting defeater THEN x connects only to a claim AND the text of x begins with \"Unless\" AND x gives a reason the claim might be false.",
    "IF x carries the Assumed OK terminator THEN x is a rebutting defeater, undermining defeater, undercutting defeater, claim or evidence AND x is asserted (assumed) to be false.",
    "IF x carries the Is OK terminator THEN x is an inference rule, claim or evidence AND, for an inference rule, x has no undercutting defeaters because it is a tautology.",
];

/// Terminators legal on `kind`, for documentation and reporting.
pub fn legal_terminators(kind: ElementKind) -> Vec<TerminatorKind> {
    TerminatorKind::ALL
        .into_iter()
        .filter(|t| t.attaches_to(kind))
        .collect()
}
