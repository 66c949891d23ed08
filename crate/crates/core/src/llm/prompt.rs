use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// System prompt for the proficiency assessment, kept byte-for-byte.
pub const PROFICIENCY_SYSTEM_PROMPT: &str = include_str!("../../fixtures/system_prompt.txt");

/// SHA-256 of [`PROFICIENCY_SYSTEM_PROMPT`].
pub const PROFICIENCY_SYSTEM_PROMPT_SHA256: &str =
    "c188bb3bd144ff8f474277320aec03ba99f9ac409b87eddc7eec21646a78f7f1";

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_TEMPERATURE: f64 = 0.0;

/// Sampling settings pinned for every request in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub temperature: f64,
    pub model: String,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: DEFAULT_SEED,
            temperature: DEFAULT_TEMPERATURE,
            model: DEFAULT_MODEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system: String,
    pub user: String,
    pub seed: u64,
    pub temperature: f64,
    pub model: String,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    seed: u64,
    temperature: f64,
}

impl PromptRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, settings: &Settings) -> Self {
        PromptRequest {
            system: system.into(),
            user: user.into(),
            seed: settings.seed,
            temperature: settings.temperature,
            model: settings.model.clone(),
        }
    }

    /// Chat-completion request body. Pure function of the five fields.
    pub fn to_wire_json(&self) -> String {
        let body = ChatBody {
            model: &self.model,
            messages: [
                Message {
                    role: "system",
                    content: &self.system,
                },
                Message {
                    role: "user",
                    content: &self.user,
                },
            ],
            seed: self.seed,
            temperature: self.temperature,
        };
        serde_json::to_string(&body).expect("request body serializes")
    }

    /// Hex SHA-256 of the wire body; the lookup key for canned and replayed responses.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_wire_json().as_bytes()))
    }
}

pub fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_prompt_fixture_hash() {
        assert_eq!(
            sha256_hex(PROFICIENCY_SYSTEM_PROMPT),
            PROFICIENCY_SYSTEM_PROMPT_SHA256
        );
        assert!(PROFICIENCY_SYSTEM_PROMPT.starts_with("You are an assistant that helps"));
    }

    #[test]
    fn wire_body_shape() {
        let req = PromptRequest::new("sys", "usr", &Settings::default());
        assert_eq!(
            req.to_wire_json(),
            r#"{"model":"gpt-4-turbo","messages":[{"role":"system","content":"sys"},{"role":"user","content":"usr"}],"seed":2024,"temperature":0.0}"#
        );
    }

    #[test]
    fn equal_requests_hash_equal() {
        let a = PromptRequest::new("s", "u", &Settings::default());
        let b = PromptRequest::new("s".to_string(), "u".to_string(), &Settings::default());
        assert_eq!(a.content_hash(), b.content_hash());
        let c = PromptRequest::new("s", "u ", &Settings::default());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
