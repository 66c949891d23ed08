//! Mitigation: ask the model how to eliminate a defeater and graft its answer.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use super::prompt::{PromptRequest, Settings};
use super::provider::{ChatProvider, ProviderError};
use crate::model::EaArgument;
use crate::rules::validate;
use crate::text::{parse, serialize};

pub const MITIGATION_SYSTEM_PROMPT: &str = "You are an assistant that helps me strengthen assurance cases written in Eliminative Argumentation by eliminating defeaters. Follow the requested answer format exactly.";

#[derive(Debug, Error)]
pub enum MitigationError {
    #[error("unknown element id `{0}`")]
    UnknownId(String),
    #[error("`{0}` is not a defeater")]
    NotADefeater(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationOutcome {
    pub narrative: String,
    /// Canonical ea-text lines added by the graft; empty when rejected.
    pub patch: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grafted: Option<EaArgument>,
    /// Why the proposed fragment was not grafted (GraftRejected).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

pub fn build_mitigation_prompt(
    arg: &EaArgument,
    defeater: &str,
    settings: &Settings,
) -> Result<PromptRequest, MitigationError> {
    let element = arg
        .element(defeater)
        .ok_or_else(|| MitigationError::UnknownId(defeater.to_string()))?;
    if !element.kind.is_defeater() {
        return Err(MitigationError::NotADefeater(defeater.to_string()));
    }
    let user = format!(
        "The assurance case below is written in Eliminative Argumentation structured prose. \
         Each line `ID [Kind]: text` declares an element, `A -> B` makes B a child of A, \
         and `ID ! AssumedOK` or `ID ! IsOK` marks an argument terminator.\n\n\
         ---\n{doc}---\n\n\
         Defeater to eliminate: {id} [{kind}]: {text}\n\n\
         Explain in two or three sentences how this defeater can be eliminated. \
         Then give the elements that eliminate it in a fenced code block tagged `ea`, \
         using the same line syntax. Use ids that do not already exist, connect the new \
         elements below {id} (for example `{id} -> E9`), and end a branch with `ID ! AssumedOK` \
         where no further argument is needed.\n",
        doc = serialize(arg),
        id = element.id,
        kind = element.kind.short_name(),
        text = element.text,
    );
    Ok(PromptRequest::new(MITIGATION_SYSTEM_PROMPT, user, settings))
}

/// Splits a response into (narrative, first fenced block body).
fn split_fenced(response: &str) -> (String, Option<String>) {
    let mut narrative = Vec::new();
    let mut block: Option<Vec<&str>> = None;
    let mut done = false;
    let mut inside = false;
    for line in response.lines() {
        let fence = line.trim_start().starts_with("```");
        if !done && fence {
            if inside {
                inside = false;
                done = true;
            } else {
                inside = true;
                block = Some(Vec::new());
            }
            continue;
        }
        if inside {
            block.as_mut().expect("open block").push(line);
        } else {
            narrative.push(line);
        }
    }
    let narrative = narrative.join("\n").trim().to_string();
    (narrative, block.map(|b| b.join("\n")))
}

/// Canonical lines of `after` that are absent from `before`.
fn added_lines(before: &EaArgument, after: &EaArgument) -> String {
    let old: HashSet<String> = serialize(before).lines().map(str::to_string).collect();
    serialize(after)
        .lines()
        .filter(|l| !old.contains(*l))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Grafts an ea-text `fragment` onto `arg`, refusing anything that adds S-code findings.
pub fn graft_fragment(arg: &EaArgument, fragment: &str) -> Result<(EaArgument, String), String> {
    let combined = format!("{}{}\n", serialize(arg), fragment);
    let grafted = parse(&combined).map_err(|errors| {
        let first = &errors[0];
        format!(
            "fragment does not parse: {:?}: {}",
            first.code, first.message
        )
    })?;
    let patch = added_lines(arg, &grafted);
    if patch.is_empty() {
        return Err("fragment adds nothing to the argument".into());
    }
    let structural = |a: &EaArgument| -> HashSet<(String, String)> {
        validate(a)
            .into_iter()
            .filter(|d| d.is_structural())
            .map(|d| (d.code.to_string(), d.subject.to_string()))
            .collect()
    };
    let before = structural(arg);
    let mut introduced: Vec<_> = structural(&grafted).difference(&before).cloned().collect();
    if !introduced.is_empty() {
        introduced.sort();
        let list: Vec<String> = introduced
            .iter()
            .map(|(c, s)| format!("{c} on {s}"))
            .collect();
        return Err(format!("fragment introduces {}", list.join(", ")));
    }
    Ok((grafted, patch))
}

pub fn generate_mitigation(
    arg: &EaArgument,
    defeater: &str,
    provider: &dyn ChatProvider,
    settings: &Settings,
) -> Result<MitigationOutcome, MitigationError> {
    let request = build_mitigation_prompt(arg, defeater, settings)?;
    let response = provider.complete(&request)?;
    let (narrative, block) = split_fenced(&response);
    let result = match block {
        None => Err("response contains no fenced ea-text fragment".to_string()),
        Some(fragment) => graft_fragment(arg, &fragment),
    };
    Ok(match result {
        Ok((grafted, patch)) => MitigationOutcome {
            narrative,
            patch,
            grafted: Some(grafted),
            rejection: None,
        },
        Err(reason) => MitigationOutcome {
            narrative,
            patch: String::new(),
            grafted: None,
            rejection: Some(format!("GraftRejected: {reason}")),
        },
    })
}
