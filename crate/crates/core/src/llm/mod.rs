//! Deterministic LLM access.
//!
//! The proficiency assessment sends every bank question in its own
//! conversation under a fixed system prompt, with seed and temperature
//! pinned. Defeater generation and mitigation build prompts from the
//! canonical text form of the argument plus a static rule library, and
//! parse the model's answer back into reviewable candidates.

pub mod bank;
pub mod defeaters;
pub mod mitigation;
pub mod prompt;
pub mod provider;
pub mod session;

pub use bank::{default_bank, load_question_bank, BankError, Category, Provenance, QuestionItem};
pub use defeaters::{
    build_defeater_prompt, parse_defeater_response, CandidateStatus, DefeaterCandidate,
    GenerationError, GenerationOptions,
};
pub use mitigation::{generate_mitigation, MitigationError, MitigationOutcome};
pub use prompt::{PromptRequest, Settings, PROFICIENCY_SYSTEM_PROMPT};
pub use provider::{CannedProvider, ChatProvider, LiveProvider, ProviderError, ReplayProvider};
pub use session::{run_proficiency_session, SessionError, Transcript, TranscriptEntry};
