//! Chat providers: live HTTP, replay from a transcript, and canned fixtures.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::PromptRequest;
use super::session::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("no canned response for request {0}")]
    NoCannedResponse(String),
    #[error("request {0} is not in the replay transcript (prompt drift)")]
    PromptDrift(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

/// Anything that can answer a single-turn chat request.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Fixture responses keyed by request hash, with an optional fallback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CannedProvider {
    #[serde(default)]
    pub responses: HashMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
}

impl CannedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(text: impl Into<String>) -> Self {
        CannedProvider {
            responses: HashMap::new(),
            default: Some(text.into()),
        }
    }

    pub fn insert(&mut self, request: &PromptRequest, response: impl Into<String>) -> &mut Self {
        self.responses
            .insert(request.content_hash(), response.into());
        self
    }

    /// Reads `{"responses": {hash: text}, "default": text?}`.
    pub fn from_json(source: &str) -> Result<Self, ProviderError> {
        serde_json::from_str(source)
            .map_err(|e| ProviderError::Config(format!("canned fixture: {e}")))
    }
}

impl ChatProvider for CannedProvider {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let hash = request.content_hash();
        self.responses
            .get(&hash)
            .or(self.default.as_ref())
            .cloned()
            .ok_or(ProviderError::NoCannedResponse(hash))
    }
}

/// Answers only requests recorded in a transcript.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    responses: HashMap<String, String>,
}

impl ReplayProvider {
    pub fn new(transcript: &Transcript) -> Self {
        ReplayProvider {
            responses: transcript
                .entries
                .iter()
                .map(|e| (e.request.content_hash(), e.response_text.clone()))
                .collect(),
        }
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let hash = request.content_hash();
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(ProviderError::PromptDrift(hash))
    }
}

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Chat-completion API over HTTP. The credential never leaves this struct.
pub struct LiveProvider {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for LiveProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveProvider")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl LiveProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        LiveProvider {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Endpoint from `EA_LLM_ENDPOINT`, credential from `EA_LLM_API_KEY`
    /// (falling back to `OPENAI_API_KEY`).
    pub fn from_env() -> Self {
        let endpoint = std::env::var("EA_LLM_ENDPOINT").unwrap_or_else(|_| DEFAULT_ENDPOINT.into());
        let api_key = std::env::var("EA_LLM_API_KEY")
            .or_else(|_| std::env::var("OPENAI_API_KEY"))
            .ok();
        Self::new(endpoint, api_key, Duration::from_secs(120))
    }
}

impl ChatProvider for LiveProvider {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send(request.to_wire_json())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::Auth(status)),
            _ => return Err(ProviderError::Http { status, body }),
        }
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::BadResponse("no message content in first choice".into()))
    }
}
