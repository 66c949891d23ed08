//! Typed graph of an Eliminative Argumentation assurance case.
//!
//! Elements are kept in insertion order and edges are directed from the
//! supported element (parent) to the supporting or challenging element
//! (child). Construction guards keep identifiers unique, edges acyclic and
//! terminators attached only where the notation allows them. Whether a given
//! edge is *legal* for its endpoint kinds is a rule-engine concern, see
//! [`crate::rules`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    Claim,
    Evidence,
    Context,
    InferenceRule,
    Strategy,
    RebuttingDefeater,
    UnderminingDefeater,
    UndercuttingDefeater,
}

impl ElementKind {
    pub const ALL: [ElementKind; 8] = [
        ElementKind::Claim,
        ElementKind::Evidence,
        ElementKind::Context,
        ElementKind::InferenceRule,
        ElementKind::Strategy,
        ElementKind::RebuttingDefeater,
        ElementKind::UnderminingDefeater,
        ElementKind::UndercuttingDefeater,
    ];

    /// Full enum name, as used in the JSON wire format.
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Claim => "Claim",
            ElementKind::Evidence => "Evidence",
            ElementKind::Context => "Context",
            ElementKind::InferenceRule => "InferenceRule",
            ElementKind::Strategy => "Strategy",
            ElementKind::RebuttingDefeater => "RebuttingDefeater",
            ElementKind::UnderminingDefeater => "UnderminingDefeater",
            ElementKind::UndercuttingDefeater => "UndercuttingDefeater",
        }
    }

    /// Short name used by the structured-prose text format.
    pub fn short_name(self) -> &'static str {
        match self {
            ElementKind::RebuttingDefeater => "Rebutting",
            ElementKind::UnderminingDefeater => "Undermining",
            ElementKind::UndercuttingDefeater => "Undercutting",
            other => other.name(),
        }
    }

    pub fn from_short_name(s: &str) -> Option<ElementKind> {
        ElementKind::ALL.into_iter().find(|k| k.short_name() == s)
    }

    pub fn is_defeater(self) -> bool {
        self.as_defeater().is_some()
    }

    pub fn as_defeater(self) -> Option<DefeaterKind> {
        match self {
            ElementKind::RebuttingDefeater => Some(DefeaterKind::Rebutting),
            ElementKind::UnderminingDefeater => Some(DefeaterKind::Undermining),
            ElementKind::UndercuttingDefeater => Some(DefeaterKind::Undercutting),
            _ => None,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

/// The three defeater kinds, each of which challenges exactly one element kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefeaterKind {
    Rebutting,
    Undermining,
    Undercutting,
}

impl DefeaterKind {
    pub const ALL: [DefeaterKind; 3] = [
        DefeaterKind::Rebutting,
        DefeaterKind::Undermining,
        DefeaterKind::Undercutting,
    ];

    pub fn element_kind(self) -> ElementKind {
        match self {
            DefeaterKind::Rebutting => ElementKind::RebuttingDefeater,
            DefeaterKind::Undermining => ElementKind::UnderminingDefeater,
            DefeaterKind::Undercutting => ElementKind::UndercuttingDefeater,
        }
    }

    /// The only element kind this defeater may challenge.
    pub fn target_kind(self) -> ElementKind {
        match self {
            DefeaterKind::Rebutting => ElementKind::Claim,
            DefeaterKind::Undermining => ElementKind::Evidence,
            DefeaterKind::Undercutting => ElementKind::InferenceRule,
        }
    }

    /// First word the defeater's text must start with.
    pub fn required_prefix(self) -> &'static str {
        match self {
            DefeaterKind::Rebutting | DefeaterKind::Undercutting => "Unless",
            DefeaterKind::Undermining => "But",
        }
    }

    /// Conventional identifier prefix for new elements of this kind.
    pub fn id_prefix(self) -> &'static str {
        match self {
            DefeaterKind::Rebutting => "R",
            DefeaterKind::Undermining => "UM",
            DefeaterKind::Undercutting => "UC",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DefeaterKind::Rebutting => "rebutting",
            DefeaterKind::Undermining => "undermining",
            DefeaterKind::Undercutting => "undercutting",
        }
    }
}

impl fmt::Display for DefeaterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefeaterKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rebutting" | "rebuttingdefeater" => Ok(DefeaterKind::Rebutting),
            "undermining" | "underminingdefeater" => Ok(DefeaterKind::Undermining),
            "undercutting" | "undercuttingdefeater" => Ok(DefeaterKind::Undercutting),
            _ => Err(ModelError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerminatorKind {
    AssumedOk,
    IsOk,
}

impl TerminatorKind {
    pub const ALL: [TerminatorKind; 2] = [TerminatorKind::AssumedOk, TerminatorKind::IsOk];

    /// Whether this terminator may be attached to an element of `kind`.
    pub fn attaches_to(self, kind: ElementKind) -> bool {
        use ElementKind::*;
        match self {
            TerminatorKind::AssumedOk => matches!(
                kind,
                RebuttingDefeater | UnderminingDefeater | UndercuttingDefeater | Claim | Evidence
            ),
            TerminatorKind::IsOk => matches!(kind, InferenceRule | Claim | Evidence),
        }
    }

    /// Spelling used in the text format (`ID ! AssumedOK`).
    pub fn text_name(self) -> &'static str {
        match self {
            TerminatorKind::AssumedOk => "AssumedOK",
            TerminatorKind::IsOk => "IsOK",
        }
    }

    pub fn from_text_name(s: &str) -> Option<TerminatorKind> {
        TerminatorKind::ALL.into_iter().find(|t| t.text_name() == s)
    }
}

impl fmt::Display for TerminatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminatorKind::AssumedOk => "AssumedOk",
            TerminatorKind::IsOk => "IsOk",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("element `{0}` has empty text")]
    EmptyText(String),
    #[error("element `{0}` text must be a single line without control characters")]
    InvalidText(String),
    #[error("`{0}` is not a valid identifier")]
    BadIdentifier(String),
    #[error("unknown element id `{0}`")]
    UnknownId(String),
    #[error("edge {0} -> {1} already exists")]
    DuplicateEdge(String, String),
    #[error("element `{0}` cannot be connected to itself")]
    SelfEdge(String),
    #[error("edge {0} -> {1} would introduce a cycle")]
    CycleIntroduced(String, String),
    #[error("{terminator} cannot be attached to {kind} `{id}`")]
    IllegalAttachment {
        id: String,
        kind: ElementKind,
        terminator: TerminatorKind,
    },
    #[error("element `{0}` already has a terminator")]
    AlreadyTerminated(String),
    #[error("unknown element kind `{0}`")]
    UnknownKind(String),
}

/// Identifier grammar: an ASCII letter followed by letters, digits, `.` or `_`.
pub fn is_valid_identifier(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
}

/// Trims `text` and checks it is usable as element text.
pub(crate) fn normalize_text(id: &str, text: &str) -> Result<String, ModelError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ModelError::EmptyText(id.to_string()));
    }
    if trimmed.chars().any(char::is_control) {
        return Err(ModelError::InvalidText(id.to_string()));
    }
    Ok(trimmed.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EaElement {
    pub id: String,
    pub kind: ElementKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminator: Option<TerminatorKind>,
}

/// An assurance case: elements in insertion order plus directed edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawArgument", into = "RawArgument")]
pub struct EaArgument {
    elements: IndexMap<String, EaElement>,
    edges: Vec<(String, String)>,
    edge_set: HashSet<(String, String)>,
}

impl EaArgument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, id: &str) -> Option<&EaElement> {
        self.elements.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.elements.contains_key(id)
    }

    pub fn elements(&self) -> impl Iterator<Item = &EaElement> {
        self.elements.values()
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.edge_set
            .contains(&(parent.to_string(), child.to_string()))
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(p, _)| p == id)
            .map(|(_, c)| c.as_str())
    }

    pub fn parents<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(_, c)| c == id)
            .map(|(p, _)| p.as_str())
    }

    pub fn add_element(
        &mut self,
        id: &str,
        kind: ElementKind,
        text: &str,
    ) -> Result<&mut Self, ModelError> {
        if !is_valid_identifier(id) {
            return Err(ModelError::BadIdentifier(id.to_string()));
        }
        if self.elements.contains_key(id) {
            return Err(ModelError::DuplicateId(id.to_string()));
        }
        let text = normalize_text(id, text)?;
        self.elements.insert(
            id.to_string(),
            EaElement {
                id: id.to_string(),
                kind,
                text,
                terminator: None,
            },
        );
        Ok(self)
    }

    /// Removes an element together with every edge touching it.
    pub fn remove_element(&mut self, id: &str) -> Result<EaElement, ModelError> {
        let removed = self
            .elements
            .shift_remove(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?;
        self.edges.retain(|(p, c)| p != id && c != id);
        self.edge_set.retain(|(p, c)| p != id && c != id);
        Ok(removed)
    }

    pub fn connect(&mut self, parent: &str, child: &str) -> Result<&mut Self, ModelError> {
        for id in [parent, child] {
            if !self.elements.contains_key(id) {
                return Err(ModelError::UnknownId(id.to_string()));
            }
        }
        if parent == child {
            return Err(ModelError::SelfEdge(parent.to_string()));
        }
        let key = (parent.to_string(), child.to_string());
        if self.edge_set.contains(&key) {
            return Err(ModelError::DuplicateEdge(key.0, key.1));
        }
        if self.reaches(child, parent) {
            return Err(ModelError::CycleIntroduced(key.0, key.1));
        }
        self.edge_set.insert(key.clone());
        self.edges.push(key);
        Ok(self)
    }

    pub fn attach_terminator(
        &mut self,
        id: &str,
        terminator: TerminatorKind,
    ) -> Result<&mut Self, ModelError> {
        let element = self
            .elements
            .get(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?;
        if !terminator.attaches_to(element.kind) {
            return Err(ModelError::IllegalAttachment {
                id: id.to_string(),
                kind: element.kind,
                terminator,
            });
        }
        self.set_terminator(id, terminator)
    }

    /// Records a terminator without checking the attachment table.
    ///
    /// Used by the readers (text and JSON) so that a misplaced terminator
    /// surfaces as an S002 diagnostic instead of a load failure.
    pub(crate) fn set_terminator(
        &mut self,
        id: &str,
        terminator: TerminatorKind,
    ) -> Result<&mut Self, ModelError> {
        let element = self
            .elements
            .get_mut(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?;
        if element.terminator.is_some() {
            return Err(ModelError::AlreadyTerminated(id.to_string()));
        }
        element.terminator = Some(terminator);
        Ok(self)
    }

    /// Depth-first reachability along edge direction.
    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(node) = stack.pop() {
            if node == to {
                return true;
            }
            if seen.insert(node) {
                stack.extend(self.children(node));
            }
        }
        false
    }

    /// Kahn's algorithm; `None` only if the edge relation is cyclic.
    pub fn topological_order(&self) -> Option<Vec<&str>> {
        let mut indegree: IndexMap<&str, usize> =
            self.elements.keys().map(|k| (k.as_str(), 0)).collect();
        for (_, c) in &self.edges {
            *indegree.get_mut(c.as_str())? += 1;
        }
        let mut ready: Vec<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.elements.len());
        while let Some(node) = ready.pop() {
            order.push(node);
            for child in self.children(node) {
                let d = indegree.get_mut(child)?;
                *d -= 1;
                if *d == 0 {
                    ready.push(child);
                }
            }
        }
        (order.len() == self.elements.len()).then_some(order)
    }

    /// Smallest unused id of the form `{prefix}{n}`, n ≥ 1.
    pub fn fresh_id(&self, prefix: &str) -> String {
        (1..)
            .map(|n| format!("{prefix}{n}"))
            .find(|id| !self.elements.contains_key(id))
            .expect("unbounded id space")
    }
}

#[derive(Serialize, Deserialize)]
struct RawArgument {
    elements: Vec<EaElement>,
    edges: Vec<(String, String)>,
}

impl TryFrom<RawArgument> for EaArgument {
    type Error = ModelError;

    fn try_from(raw: RawArgument) -> Result<Self, Self::Error> {
        let mut arg = EaArgument::new();
        for el in &raw.elements {
            arg.add_element(&el.id, el.kind, &el.text)?;
        }
        for (p, c) in &raw.edges {
            arg.connect(p, c)?;
        }
        for el in &raw.elements {
            if let Some(t) = el.terminator {
                arg.set_terminator(&el.id, t)?;
            }
        }
        Ok(arg)
    }
}

impl From<EaArgument> for RawArgument {
    fn from(arg: EaArgument) -> Self {
        RawArgument {
            elements: arg.elements.into_values().collect(),
            edges: arg.edges,
        }
    }
}
