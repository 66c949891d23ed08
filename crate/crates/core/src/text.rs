//! Structured-prose text format for assurance cases.
//!
//! ```text
//! # comment
//! C1 [Claim]: The pump stops on demand
//! R1 [Rebutting]: Unless the stop command is lost
//! C1 -> R1
//! R1 ! AssumedOK
//! ```
//!
//! Node lines come first in canonical output, then edges, then terminators.
//! The parser accepts the three line forms in any order and resolves
//! references after all node lines are read.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{is_valid_identifier, EaArgument, ElementKind, ModelError, TerminatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorCode {
    BadKind,
    BadId,
    MissingColon,
    EmptyText,
    BadEdge,
    BadTerminator,
    DuplicateId,
    UnknownRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub code: ParseErrorCode,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {:?}: {}",
            self.line, self.column, self.code, self.message
        )
    }
}

impl std::error::Error for ParseError {}

struct Located<T> {
    line: usize,
    column: usize,
    value: T,
}

struct Edge<'a> {
    parent: Located<&'a str>,
    child: Located<&'a str>,
}

#[derive(Default)]
struct Collected<'a> {
    edges: Vec<Edge<'a>>,
    terminators: Vec<(Located<&'a str>, Located<TerminatorKind>)>,
}

/// Parses a structured-prose document. All recoverable errors are reported.
pub fn parse(input: &str) -> Result<EaArgument, Vec<ParseError>> {
    let mut arg = EaArgument::new();
    let mut errors = Vec::new();
    let mut collected = Collected::default();

    for (idx, raw) in input.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let content = line.trim_start();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let indent = line[..line.len() - content.len()].chars().count();
        if let Err(e) = parse_line(content, line_no, indent, &mut arg, &mut collected) {
            errors.push(e);
        }
    }

    for Edge { parent, child } in collected.edges {
        let mut missing = false;
        for end in [&parent, &child] {
            if !arg.contains(end.value) {
                missing = true;
                errors.push(err(
                    end.line,
                    end.column,
                    ParseErrorCode::UnknownRef,
                    format!("unknown element `{}`", end.value),
                ));
            }
        }
        if missing {
            continue;
        }
        if let Err(e) = arg.connect(parent.value, child.value) {
            errors.push(err(
                parent.line,
                parent.column,
                ParseErrorCode::BadEdge,
                e.to_string(),
            ));
        }
    }

    for (id, term) in collected.terminators {
        match arg.set_terminator(id.value, term.value) {
            Ok(_) => {}
            Err(ModelError::UnknownId(_)) => errors.push(err(
                id.line,
                id.column,
                ParseErrorCode::UnknownRef,
                format!("unknown element `{}`", id.value),
            )),
            Err(e) => errors.push(err(
                term.line,
                term.column,
                ParseErrorCode::BadTerminator,
                e.to_string(),
            )),
        }
    }

    if errors.is_empty() {
        Ok(arg)
    } else {
        errors.sort_by_key(|e| (e.line, e.column));
        Err(errors)
    }
}

fn err(line: usize, column: usize, code: ParseErrorCode, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        code,
        message: message.into(),
    }
}

/// 1-based character column of byte offset `at` in `content`, after `indent` leading characters.
fn column_of(content: &str, at: usize, indent: usize) -> usize {
    indent + content[..at].chars().count() + 1
}

fn parse_line<'a>(
    content: &'a str,
    line_no: usize,
    indent: usize,
    arg: &mut EaArgument,
    collected: &mut Collected<'a>,
) -> Result<(), ParseError> {
    let col = |at: usize| column_of(content, at, indent);
    let id_end = content
        .find(|c: char| c.is_whitespace() || matches!(c, '[' | '!' | ':' | '-'))
        .unwrap_or(content.len());
    let id = &content[..id_end];
    let rest_start = id_end + (content[id_end..].len() - content[id_end..].trim_start().len());
    let rest = &content[rest_start..];

    if id.is_empty() || !is_valid_identifier(id) {
        return Err(err(
            line_no,
            col(0),
            ParseErrorCode::BadId,
            format!(
                "`{}` is not a valid identifier",
                if id.is_empty() { content } else { id }
            ),
        ));
    }

    if let Some(after) = rest.strip_prefix("->") {
        let child_raw = after.trim();
        let child_at = rest_start + 2 + (after.len() - after.trim_start().len());
        if !is_valid_identifier(child_raw) {
            return Err(err(
                line_no,
                col(child_at.min(content.len())),
                ParseErrorCode::BadEdge,
                format!("edge target `{child_raw}` is not a valid identifier"),
            ));
        }
        collected.edges.push(Edge {
            parent: Located {
                line: line_no,
                column: col(0),
                value: id,
            },
            child: Located {
                line: line_no,
                column: col(child_at),
                value: child_raw,
            },
        });
        return Ok(());
    }

    if let Some(after) = rest.strip_prefix('!') {
        let name = after.trim();
        let name_at = rest_start + 1 + (after.len() - after.trim_start().len());
        let terminator = TerminatorKind::from_text_name(name).ok_or_else(|| {
            err(
                line_no,
                col(name_at.min(content.len())),
                ParseErrorCode::BadTerminator,
                format!("unknown terminator `{name}`, expected AssumedOK or IsOK"),
            )
        })?;
        collected.terminators.push((
            Located {
                line: line_no,
                column: col(0),
                value: id,
            },
            Located {
                line: line_no,
                column: col(name_at),
                value: terminator,
            },
        ));
        return Ok(());
    }

    let Some(bracketed) = rest.strip_prefix('[') else {
        return Err(if rest.starts_with(':') {
            err(
                line_no,
                col(rest_start),
                ParseErrorCode::BadKind,
                "missing `[Kind]` before `:`",
            )
        } else {
            err(
                line_no,
                col(rest_start.min(content.len())),
                ParseErrorCode::MissingColon,
                "expected `[Kind]: text`, `-> ID` or `! Terminator`",
            )
        });
    };
    let kind_at = rest_start + 1;
    let Some(close) = bracketed.find(']') else {
        return Err(err(
            line_no,
            col(kind_at),
            ParseErrorCode::BadKind,
            "unterminated `[Kind]`",
        ));
    };
    let kind_name = bracketed[..close].trim();
    let kind = ElementKind::from_short_name(kind_name).ok_or_else(|| {
        err(
            line_no,
            col(kind_at),
            ParseErrorCode::BadKind,
            format!("unknown element kind `{kind_name}`"),
        )
    })?;
    let after_kind = &bracketed[close + 1..];
    let colon_at = kind_at + close + 1 + (after_kind.len() - after_kind.trim_start().len());
    let Some(text) = after_kind.trim_start().strip_prefix(':') else {
        return Err(err(
            line_no,
            col(colon_at.min(content.len())),
            ParseErrorCode::MissingColon,
            "expected `:` after `[Kind]`",
        ));
    };
    let text_at = (colon_at + 1).min(content.len());

    match arg.add_element(id, kind, text) {
        Ok(_) => Ok(()),
        Err(ModelError::DuplicateId(_)) => Err(err(
            line_no,
            col(0),
            ParseErrorCode::DuplicateId,
            format!("duplicate element id `{id}`"),
        )),
        Err(e) => Err(err(
            line_no,
            col(text_at),
            ParseErrorCode::EmptyText,
            e.to_string(),
        )),
    }
}

/// Canonical text form: element lines, then edge lines, then terminator lines.
pub fn serialize(arg: &EaArgument) -> String {
    let mut out = String::new();
    for el in arg.elements() {
        out.push_str(&format!(
            "{} [{}]: {}\n",
            el.id,
            el.kind.short_name(),
            el.text
        ));
    }
    for (p, c) in arg.edges() {
        out.push_str(&format!("{p} -> {c}\n"));
    }
    for el in arg.elements() {
        if let Some(t) = el.terminator {
            out.push_str(&format!("{} ! {}\n", el.id, t.text_name()));
        }
    }
    out
}
