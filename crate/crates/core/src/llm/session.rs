//! Proficiency assessment runs and their transcripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bank::QuestionItem;
use super::prompt::{PromptRequest, Settings, PROFICIENCY_SYSTEM_PROMPT};
use super::provider::{ChatProvider, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question_id: String,
    pub request: PromptRequest,
    pub response_text: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn from_json(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    /// Copy with every timestamp blanked, for byte comparison of runs.
    pub fn without_timestamps(&self) -> Transcript {
        Transcript {
            entries: self
                .entries
                .iter()
                .map(|e| TranscriptEntry {
                    timestamp: String::new(),
                    ..e.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("question bank is empty")]
    EmptyBank,
    #[error("question `{question_id}`: {source}")]
    Provider {
        question_id: String,
        #[source]
        source: ProviderError,
    },
}

/// The request sent for one bank question: fixed system prompt, question as the user turn.
pub fn question_request(question: &QuestionItem, settings: &Settings) -> PromptRequest {
    PromptRequest::new(PROFICIENCY_SYSTEM_PROMPT, question.text.clone(), settings)
}

pub fn run_proficiency_session(
    bank: &[QuestionItem],
    provider: &dyn ChatProvider,
    settings: &Settings,
) -> Result<Transcript, SessionError> {
    run_with_clock(bank, provider, settings, || chrono::Utc::now().to_rfc3339())
}

/// Sequential run: one isolated single-turn conversation per question, in bank order.
pub fn run_with_clock(
    bank: &[QuestionItem],
    provider: &dyn ChatProvider,
    settings: &Settings,
    mut clock: impl FnMut() -> String,
) -> Result<Transcript, SessionError> {
    if bank.is_empty() {
        return Err(SessionError::EmptyBank);
    }
    let mut entries = Vec::with_capacity(bank.len());
    for question in bank {
        let request = question_request(question, settings);
        let response_text =
            provider
                .complete(&request)
                .map_err(|source| SessionError::Provider {
                    question_id: question.id.clone(),
                    source,
                })?;
        entries.push(TranscriptEntry {
            question_id: question.id.clone(),
            request,
            response_text,
            timestamp: clock(),
        });
    }
    Ok(Transcript { entries })
}
