//! Toolkit for Eliminative Argumentation assurance cases.
//!
//! - [`model`]: the typed argument graph
//! - [`text`]: structured-prose reader and canonical writer
//! - [`rules`]: coded diagnostics and defeater coverage
//! - [`llm`]: question bank, deterministic prompting, defeater generation and mitigation
//! - [`stats`]: two-rater agreement (Kendall tau-b) and rating aggregation
//! - [`service`]: file-backed review store and its HTTP front-end

pub mod llm;
pub mod model;
pub mod rules;
pub mod service;
pub mod stats;
pub mod text;

pub use model::{DefeaterKind, EaArgument, EaElement, ElementKind, ModelError, TerminatorKind};
pub use rules::{check_text, coverage, validate, CoverageReport, Diagnostic, Severity};
pub use text::{parse, serialize, ParseError, ParseErrorCode};
