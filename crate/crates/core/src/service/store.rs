//! File-backed, event-sourced store for the defeater review loop.
//!
//! Each argument lives in `<data_dir>/<argument_id>.json`, rewritten
//! atomically (temp file + rename) on every mutation. The stored state keeps
//! the canonical text of revision 1 plus an append-only event log; replaying
//! the log over that base reproduces the current argument and candidates.
//!
//! Writes to one argument are serialized behind its writer lock. Readers
//! clone an `Arc` snapshot and never block on writers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::defeaters::{check_target, graft_defeater};
use crate::llm::{
    build_defeater_prompt, parse_defeater_response, CandidateStatus, ChatProvider,
    DefeaterCandidate, GenerationError, GenerationOptions, ProviderError, Settings,
};
use crate::model::{DefeaterKind, EaArgument};
use crate::rules::{check_text, coverage, validate, CoverageError, CoverageReport, Diagnostic};
use crate::text::{parse, serialize, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Accept,
    Refine,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Proposed {
        revision: u64,
        target: String,
        kind: DefeaterKind,
        candidates: Vec<DefeaterCandidate>,
        timestamp: String,
    },
    Decided {
        revision: u64,
        candidate_id: String,
        action: Action,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        editor_text: Option<String>,
        /// Id of the element grafted by Accept/Refine.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        element_id: Option<String>,
        timestamp: String,
    },
}

impl LogEvent {
    pub fn revision(&self) -> u64 {
        match self {
            LogEvent::Proposed { revision, .. } | LogEvent::Decided { revision, .. } => *revision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredArgument {
    pub argument_id: String,
    pub revision: u64,
    /// Canonical text of the argument as created (revision 1).
    pub base: String,
    pub argument: EaArgument,
    pub candidates: Vec<DefeaterCandidate>,
    pub log: Vec<LogEvent>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("argument `{0}` not found")]
    NotFound(String),
    #[error("candidate `{0}` not found")]
    CandidateNotFound(String),
    #[error("document does not parse ({} error(s))", .0.len())]
    Parse(Vec<ParseError>),
    #[error("{0}")]
    Generation(#[from] GenerationError),
    #[error("provider failure: {0}")]
    Provider(#[from] ProviderError),
    #[error("candidate `{id}` was already decided ({status:?})")]
    AlreadyDecided { id: String, status: CandidateStatus },
    #[error("text fails the semantic check for its kind")]
    SemanticCheck(Vec<Diagnostic>),
    #[error("Refine requires edited_text")]
    MissingEditedText,
    #[error("revision conflict: expected {expected}, current is {current}")]
    RevisionConflict { expected: u64, current: u64 },
    #[error("graft rejected: {0}")]
    GraftRejected(String),
    #[error("coverage undefined: {0}")]
    Coverage(#[from] CoverageError),
    #[error("event log is inconsistent: {0}")]
    CorruptLog(String),
    #[error("storage: {0}")]
    Io(String),
}

impl ServiceError {
    pub fn status_code(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) | ServiceError::CandidateNotFound(_) => 404,
            ServiceError::Parse(_) => 400,
            ServiceError::Generation(GenerationError::UnknownId(_)) => 404,
            ServiceError::Generation(GenerationError::KindMismatch { .. }) => 409,
            ServiceError::Generation(GenerationError::NoCandidatesRequested) => 400,
            ServiceError::Generation(GenerationError::EmptyResponse) => 502,
            ServiceError::Provider(_) => 502,
            ServiceError::AlreadyDecided { .. } | ServiceError::RevisionConflict { .. } => 409,
            ServiceError::SemanticCheck(_)
            | ServiceError::MissingEditedText
            | ServiceError::GraftRejected(_)
            | ServiceError::Coverage(_) => 422,
            ServiceError::CorruptLog(_) | ServiceError::Io(_) => 500,
        }
    }

    /// Stable machine-readable error name for response bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::CandidateNotFound(_) => "CandidateNotFound",
            ServiceError::Parse(_) => "ParseError",
            ServiceError::Generation(GenerationError::UnknownId(_)) => "UnknownId",
            ServiceError::Generation(GenerationError::KindMismatch { .. }) => "KindMismatch",
            ServiceError::Generation(GenerationError::NoCandidatesRequested) => "BadRequest",
            ServiceError::Generation(GenerationError::EmptyResponse) => "EmptyResponse",
            ServiceError::Provider(_) => "ProviderError",
            ServiceError::AlreadyDecided { .. } => "AlreadyDecided",
            ServiceError::SemanticCheck(_) => "SemanticCheck",
            ServiceError::MissingEditedText => "MissingEditedText",
            ServiceError::RevisionConflict { .. } => "RevisionConflict",
            ServiceError::GraftRejected(_) => "GraftRejected",
            ServiceError::Coverage(_) => "PreconditionViolated",
            ServiceError::CorruptLog(_) => "CorruptLog",
            ServiceError::Io(_) => "StorageError",
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Io(e.to_string())
}

/// Mutable part of an argument's state, shared by live decisions and replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewState {
    pub argument: EaArgument,
    pub candidates: Vec<DefeaterCandidate>,
    pub revision: u64,
}

impl ReviewState {
    fn candidate_index(&self, id: &str) -> Result<usize, ServiceError> {
        self.candidates
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| ServiceError::CandidateNotFound(id.to_string()))
    }

    /// Appends proposed candidates, renumbering them `cand-N` across the argument.
    pub fn propose(&mut self, mut fresh: Vec<DefeaterCandidate>) -> Vec<DefeaterCandidate> {
        for c in &mut fresh {
            c.id = format!("cand-{}", self.candidates.len() + 1);
            c.status = CandidateStatus::Proposed;
            c.refined_text = None;
            self.candidates.push(c.clone());
        }
        self.revision += 1;
        fresh
    }

    /// Applies one decision; returns the id of the grafted element, if any.
    pub fn decide(
        &mut self,
        candidate_id: &str,
        action: Action,
        edited_text: Option<&str>,
    ) -> Result<Option<String>, ServiceError> {
        let idx = self.candidate_index(candidate_id)?;
        let candidate = &self.candidates[idx];
        if candidate.status != CandidateStatus::Proposed {
            return Err(ServiceError::AlreadyDecided {
                id: candidate_id.to_string(),
                status: candidate.status,
            });
        }
        let text = match action {
            Action::Reject => None,
            Action::Accept => Some(candidate.text.clone()),
            Action::Refine => Some(
                edited_text
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .ok_or(ServiceError::MissingEditedText)?
                    .to_string(),
            ),
        };

        let mut element_id = None;
        if let Some(text) = &text {
            let findings = check_text(candidate.kind.element_kind(), text);
            if !findings.is_empty() {
                return Err(ServiceError::SemanticCheck(findings));
            }
            let before = structural_errors(&self.argument);
            let mut next = self.argument.clone();
            let id = graft_defeater(&mut next, &candidate.target_element, candidate.kind, text)
                .map_err(|e| ServiceError::GraftRejected(e.to_string()))?;
            let introduced: Vec<_> = structural_errors(&next)
                .into_iter()
                .filter(|d| !before.contains(d))
                .collect();
            if !introduced.is_empty() {
                return Err(ServiceError::GraftRejected(format!(
                    "{} new structural error(s)",
                    introduced.len()
                )));
            }
            self.argument = next;
            element_id = Some(id);
        }

        let candidate = &mut self.candidates[idx];
        match action {
            Action::Accept => candidate.status = CandidateStatus::Accepted,
            Action::Reject => candidate.status = CandidateStatus::Rejected,
            Action::Refine => {
                candidate.status = CandidateStatus::Refined;
                candidate.refined_text = text;
            }
        }
        self.revision += 1;
        Ok(element_id)
    }
}

fn structural_errors(arg: &EaArgument) -> Vec<(String, String)> {
    validate(arg)
        .into_iter()
        .filter(|d| d.is_structural() && d.is_error())
        .map(|d| (d.code.to_string(), d.subject.to_string()))
        .collect()
}

impl StoredArgument {
    /// Rebuilds state from `base` and the event log alone.
    pub fn replay(&self) -> Result<ReviewState, ServiceError> {
        let argument = parse(&self.base).map_err(ServiceError::Parse)?;
        let mut state = ReviewState {
            argument,
            candidates: Vec::new(),
            revision: 1,
        };
        for event in &self.log {
            match event {
                LogEvent::Proposed { candidates, .. } => {
                    let before = state.candidates.len();
                    let assigned = state.propose(candidates.clone());
                    if assigned
                        .iter()
                        .map(|c| &c.id)
                        .ne(candidates.iter().map(|c| &c.id))
                    {
                        return Err(ServiceError::CorruptLog(format!(
                            "candidate ids after {before} do not match the log"
                        )));
                    }
                }
                LogEvent::Decided {
                    candidate_id,
                    action,
                    editor_text,
                    element_id,
                    ..
                } => {
                    let grafted = state.decide(candidate_id, *action, editor_text.as_deref())?;
                    if grafted != *element_id {
                        return Err(ServiceError::CorruptLog(format!(
                            "decision on {candidate_id} grafted {grafted:?}, log says {element_id:?}"
                        )));
                    }
                }
            }
            if state.revision != event.revision() {
                return Err(ServiceError::CorruptLog(format!(
                    "revision {} after event, log says {}",
                    state.revision,
                    event.revision()
                )));
            }
        }
        Ok(state)
    }

    pub fn text(&self) -> String {
        serialize(&self.argument)
    }

    fn state(&self) -> ReviewState {
        ReviewState {
            argument: self.argument.clone(),
            candidates: self.candidates.clone(),
            revision: self.revision,
        }
    }
}

struct Slot {
    writer: Mutex<()>,
    current: RwLock<Arc<StoredArgument>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<StoredArgument> {
        self.current.read().expect("snapshot lock").clone()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CreateOutcome {
    pub argument_id: String,
    pub revision: u64,
    pub diagnostics: Vec<Diagnostic>,
    /// Structural Error-severity findings exist; the argument is stored anyway.
    #[serde(skip)]
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArgumentSummary {
    pub argument_id: String,
    pub revision: u64,
}

type Clock = Box<dyn Fn() -> String + Send + Sync>;

pub struct ReviewStore {
    data_dir: PathBuf,
    provider: Arc<dyn ChatProvider>,
    settings: Settings,
    options: GenerationOptions,
    slots: RwLock<BTreeMap<String, Arc<Slot>>>,
    create_lock: Mutex<u64>,
    clock: Clock,
}

impl ReviewStore {
    /// Opens (creating if needed) a data directory and loads every stored argument.
    pub fn open(
        data_dir: impl Into<PathBuf>,
        provider: Arc<dyn ChatProvider>,
        settings: Settings,
    ) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir).map_err(io_err)?;
        let mut slots = BTreeMap::new();
        let mut max_seq = 0;
        for entry in fs::read_dir(&data_dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let raw = fs::read_to_string(&path).map_err(io_err)?;
            let stored: StoredArgument = serde_json::from_str(&raw)
                .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
            if let Some(seq) = stored
                .argument_id
                .strip_prefix("arg-")
                .and_then(|n| n.parse::<u64>().ok())
            {
                max_seq = max_seq.max(seq);
            }
            slots.insert(
                stored.argument_id.clone(),
                Arc::new(Slot {
                    writer: Mutex::new(()),
                    current: RwLock::new(Arc::new(stored)),
                }),
            );
        }
        Ok(ReviewStore {
            data_dir,
            provider,
            settings,
            options: GenerationOptions::default(),
            slots: RwLock::new(slots),
            create_lock: Mutex::new(max_seq),
            clock: Box::new(|| chrono::Utc::now().to_rfc3339()),
        })
    }

    pub fn with_options(mut self, options: GenerationOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.data_dir.join(format!("{id}.json"))
    }

    fn persist(&self, stored: &StoredArgument) -> Result<(), ServiceError> {
        let json = serde_json::to_vec_pretty(stored).map_err(io_err)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.data_dir).map_err(io_err)?;
        tmp.write_all(&json).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(self.path_for(&stored.argument_id))
            .map_err(|e| io_err(e.error))?;
        Ok(())
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.slots
            .read()
            .expect("slot map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, text: &str) -> Result<CreateOutcome, ServiceError> {
        let argument = parse(text).map_err(ServiceError::Parse)?;
        let diagnostics = validate(&argument);
        let flagged = diagnostics
            .iter()
            .any(|d| d.is_structural() && d.is_error());

        let mut seq = self.create_lock.lock().expect("create lock");
        *seq += 1;
        let argument_id = format!("arg-{}", *seq);
        let stored = StoredArgument {
            argument_id: argument_id.clone(),
            revision: 1,
            base: serialize(&argument),
            argument,
            candidates: Vec::new(),
            log: Vec::new(),
        };
        self.persist(&stored)?;
        self.slots.write().expect("slot map lock").insert(
            argument_id.clone(),
            Arc::new(Slot {
                writer: Mutex::new(()),
                current: RwLock::new(Arc::new(stored)),
            }),
        );
        Ok(CreateOutcome {
            argument_id,
            revision: 1,
            diagnostics,
            flagged,
        })
    }

    pub fn list(&self) -> Vec<ArgumentSummary> {
        self.slots
            .read()
            .expect("slot map lock")
            .values()
            .map(|slot| {
                let s = slot.snapshot();
                ArgumentSummary {
                    argument_id: s.argument_id.clone(),
                    revision: s.revision,
                }
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<Arc<StoredArgument>, ServiceError> {
        Ok(self.slot(id)?.snapshot())
    }

    pub fn diagnostics(&self, id: &str) -> Result<(u64, Vec<Diagnostic>), ServiceError> {
        let s = self.get(id)?;
        Ok((s.revision, validate(&s.argument)))
    }

    pub fn coverage(&self, id: &str) -> Result<(u64, CoverageReport), ServiceError> {
        let s = self.get(id)?;
        Ok((s.revision, coverage(&s.argument)?))
    }

    /// Runs `mutate` under the argument's writer lock and persists the result.
    fn mutate<T>(
        &self,
        id: &str,
        expected_revision: Option<u64>,
        mutate: impl FnOnce(&StoredArgument, &mut ReviewState) -> Result<(LogEvent, T), ServiceError>,
    ) -> Result<(Arc<StoredArgument>, T), ServiceError> {
        let slot = self.slot(id)?;
        let _writer = slot.writer.lock().expect("writer lock");
        let current = slot.snapshot();
        if let Some(expected) = expected_revision {
            if expected != current.revision {
                return Err(ServiceError::RevisionConflict {
                    expected,
                    current: current.revision,
                });
            }
        }
        let mut state = current.state();
        let (event, out) = mutate(&current, &mut state)?;
        let mut log = current.log.clone();
        log.push(event);
        let next = StoredArgument {
            argument_id: current.argument_id.clone(),
            revision: state.revision,
            base: current.base.clone(),
            argument: state.argument,
            candidates: state.candidates,
            log,
        };
        self.persist(&next)?;
        let next = Arc::new(next);
        *slot.current.write().expect("snapshot lock") = next.clone();
        Ok((next, out))
    }

    pub fn request_candidates(
        &self,
        id: &str,
        target: &str,
        kind: DefeaterKind,
        expected_revision: Option<u64>,
    ) -> Result<(Arc<StoredArgument>, Vec<DefeaterCandidate>), ServiceError> {
        self.mutate(id, expected_revision, |current, state| {
            check_target(&current.argument, target, kind)?;
            let request = build_defeater_prompt(
                &current.argument,
                target,
                kind,
                &self.options,
                &self.settings,
            )?;
            let response = self.provider.complete(&request)?;
            let parsed = parse_defeater_response(&response, kind, target)?;
            let fresh = state.propose(parsed);
            let event = LogEvent::Proposed {
                revision: state.revision,
                target: target.to_string(),
                kind,
                candidates: fresh.clone(),
                timestamp: (self.clock)(),
            };
            Ok((event, fresh))
        })
    }

    pub fn decide(
        &self,
        id: &str,
        candidate_id: &str,
        action: Action,
        edited_text: Option<&str>,
        expected_revision: Option<u64>,
    ) -> Result<Arc<StoredArgument>, ServiceError> {
        self.mutate(id, expected_revision, |_, state| {
            let element_id = state.decide(candidate_id, action, edited_text)?;
            let editor_text = match action {
                Action::Refine => edited_text.map(|t| t.trim().to_string()),
                _ => None,
            };
            let event = LogEvent::Decided {
                revision: state.revision,
                candidate_id: candidate_id.to_string(),
                action,
                editor_text,
                element_id,
                timestamp: (self.clock)(),
            };
            Ok((event, ()))
        })
        .map(|(stored, ())| stored)
    }
}
