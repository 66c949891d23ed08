//! Proficiency question bank.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BANK_JSON: &str = include_str!("../../fixtures/question_bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Structural,
    Semantic,
    Generation,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::Structural,
        Category::Semantic,
        Category::Generation,
    ];
}

/// Whether a question is quoted from published material or written for this bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Paper,
    Authored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub category: Category,
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("bad question bank: {0}")]
    BadFormat(String),
    #[error("category counts {actual:?} do not match declared {declared:?}")]
    CountMismatch {
        declared: BTreeMap<Category, usize>,
        actual: BTreeMap<Category, usize>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDocument {
    declared_counts: BTreeMap<Category, usize>,
    questions: Vec<QuestionItem>,
}

pub fn load_question_bank(source: &str) -> Result<Vec<QuestionItem>, BankError> {
    let doc: BankDocument =
        serde_json::from_str(source).map_err(|e| BankError::BadFormat(e.to_string()))?;
    let mut seen = HashSet::new();
    for q in &doc.questions {
        if q.id.trim().is_empty() {
            return Err(BankError::BadFormat("question with empty id".into()));
        }
        if q.text.trim().is_empty() {
            return Err(BankError::BadFormat(format!(
                "question `{}` has empty text",
                q.id
            )));
        }
        if !seen.insert(q.id.as_str()) {
            return Err(BankError::BadFormat(format!(
                "duplicate question id `{}`",
                q.id
            )));
        }
    }
    let mut actual: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for q in &doc.questions {
        *actual.entry(q.category).or_default() += 1;
    }
    let declared: BTreeMap<Category, usize> = Category::ALL
        .iter()
        .map(|c| (*c, doc.declared_counts.get(c).copied().unwrap_or(0)))
        .collect();
    if declared != actual {
        return Err(BankError::CountMismatch { declared, actual });
    }
    Ok(doc.questions)
}

pub fn default_bank() -> Vec<QuestionItem> {
    load_question_bank(DEFAULT_BANK_JSON).expect("shipped bank is valid")
}

pub fn category_counts(bank: &[QuestionItem]) -> BTreeMap<Category, usize> {
    let mut counts = BTreeMap::new();
    for q in bank {
        *counts.entry(q.category).or_insert(0) += 1;
    }
    counts
}
