//! Rater agreement and rating aggregation.
//!
//! Scores run from 1 (totally correct) to 5 (incorrect). Two raters score
//! every question; agreement is Kendall's tau-b with a normal-approximation
//! confidence interval, and category means are combined weighted by the
//! number of questions in each category.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::llm::bank::{Category, QuestionItem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("tau-b is undefined: {0}")]
    DegenerateInput(&'static str),
    #[error("confidence level {0} is outside (0, 1)")]
    BadLevel(f64),
    #[error("need at least 3 samples for an interval, got {0}")]
    TooFewSamples(usize),
    #[error("tau {0} is outside [-1, 1]")]
    TauOutOfRange(f64),
    #[error("question `{0}` is not in the bank")]
    UnknownQuestion(String),
    #[error("incomplete rating matrix: {0}")]
    IncompleteMatrix(String),
    #[error("score {score} for question `{question}` is outside 1..=5")]
    ScoreOutOfRange { question: String, score: i64 },
    #[error("overall rating {0} is outside [1, 5]")]
    OutOfRange(f64),
    #[error("malformed ratings: {0}")]
    BadRatings(String),
}

/// Sum of t(t-1)/2 over runs of equal adjacent values in a sorted sequence.
fn tied_pairs<T: Eq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Merge sort that counts strict inversions.
fn sort_counting_swaps<T: Ord + Copy>(values: &mut [T], scratch: &mut Vec<T>) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut values[..mid], scratch);
    swaps += sort_counting_swaps(&mut values[mid..], scratch);
    scratch.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[j] < values[i] {
            swaps += (mid - i) as u64;
            scratch.push(values[j]);
            j += 1;
        } else {
            scratch.push(values[i]);
            i += 1;
        }
    }
    scratch.extend_from_slice(&values[i..mid]);
    scratch.extend_from_slice(&values[j..n]);
    values.copy_from_slice(scratch);
    swaps
}

/// Kendall's tau-b, computed with Knight's O(n log n) algorithm.
///
/// tau_b = (C - D) / sqrt((n0 - n1)(n0 - n2)) with n1, n2 the tied-pair
/// counts in `x` and `y`.
pub fn kendall_tau_b<T: Ord + Copy>(x: &[T], y: &[T]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::DegenerateInput("fewer than two observations"));
    }
    let mut pairs: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let ties_x = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_joint = tied_pairs(pairs.iter().copied());

    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(n);
    let swaps = sort_counting_swaps(&mut ys, &mut scratch);
    let ties_y = tied_pairs(ys.iter());

    if ties_x == n0 || ties_y == n0 {
        return Err(StatsError::DegenerateInput(
            "a rater gave the same score everywhere",
        ));
    }
    let numerator =
        n0 as f64 - ties_x as f64 - ties_y as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    let denominator = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

/// Two-sided normal quantile for a confidence `level`.
pub fn z_for_level(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Normal-approximation interval tau ± z·sqrt(2(2n+5) / (9n(n-1))), clamped to [-1, 1].
pub fn tau_confidence_interval(tau: f64, n: usize, level: f64) -> Result<(f64, f64), StatsError> {
    let z = z_for_level(level)?;
    if n < 3 {
        return Err(StatsError::TooFewSamples(n));
    }
    if !(-1.0..=1.0).contains(&tau) {
        return Err(StatsError::TauOutOfRange(tau));
    }
    let nf = n as f64;
    let se = (2.0 * (2.0 * nf + 5.0) / (9.0 * nf * (nf - 1.0))).sqrt();
    Ok(((tau - z * se).max(-1.0), (tau + z * se).min(1.0)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub question_id: String,
    pub rater_id: String,
    pub score: i64,
}

/// Complete two-rater score table. Questions and raters keep first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    questions: Vec<String>,
    raters: [String; 2],
    scores: Vec<[u8; 2]>,
}

impl RatingMatrix {
    pub fn from_records(records: &[RatingRecord]) -> Result<Self, StatsError> {
        let mut raters: Vec<String> = Vec::new();
        let mut cells: IndexMap<String, [Option<u8>; 2]> = IndexMap::new();
        for r in records {
            if !(1..=5).contains(&r.score) {
                return Err(StatsError::ScoreOutOfRange {
                    question: r.question_id.clone(),
                    score: r.score,
                });
            }
            let slot = match raters.iter().position(|x| *x == r.rater_id) {
                Some(i) => i,
                None if raters.len() < 2 => {
                    raters.push(r.rater_id.clone());
                    raters.len() - 1
                }
                None => {
                    return Err(StatsError::IncompleteMatrix(format!(
                        "expected exactly two raters, found a third: `{}`",
                        r.rater_id
                    )))
                }
            };
            let row = cells.entry(r.question_id.clone()).or_insert([None, None]);
            if row[slot].replace(r.score as u8).is_some() {
                return Err(StatsError::IncompleteMatrix(format!(
                    "duplicate score for question `{}` by rater `{}`",
                    r.question_id, r.rater_id
                )));
            }
        }
        if raters.len() != 2 {
            return Err(StatsError::IncompleteMatrix(format!(
                "expected exactly two raters, found {}",
                raters.len()
            )));
        }
        let mut scores = Vec::with_capacity(cells.len());
        for (q, row) in &cells {
            match row {
                [Some(a), Some(b)] => scores.push([*a, *b]),
                _ => {
                    let missing = if row[0].is_none() {
                        &raters[0]
                    } else {
                        &raters[1]
                    };
                    return Err(StatsError::IncompleteMatrix(format!(
                        "question `{q}` has no score from rater `{missing}`"
                    )));
                }
            }
        }
        Ok(RatingMatrix {
            questions: cells.into_keys().collect(),
            raters: [raters[0].clone(), raters[1].clone()],
            scores,
        })
    }

    /// Reads `question_id,rater_id,score` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| StatsError::BadRatings(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["question_id", "rater_id", "score"] {
            return Err(StatsError::BadRatings(
                "header must be `question_id,rater_id,score`".into(),
            ));
        }
        let records = rdr
            .deserialize()
            .collect::<Result<Vec<RatingRecord>, _>>()
            .map_err(|e| StatsError::BadRatings(e.to_string()))?;
        Self::from_records(&records)
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn raters(&self) -> &[String; 2] {
        &self.raters
    }

    pub fn rater_scores(&self, rater: usize) -> Vec<u8> {
        self.scores.iter().map(|row| row[rater]).collect()
    }

    /// Mean of the two raters' scores for each question.
    pub fn question_scores(&self) -> impl Iterator<Item = (&str, f64)> {
        self.questions
            .iter()
            .zip(&self.scores)
            .map(|(q, [a, b])| (q.as_str(), (*a as f64 + *b as f64) / 2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryStat {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryReport {
    pub per_category: BTreeMap<Category, CategoryStat>,
    pub overall: f64,
}

/// Σ count·mean / Σ count.
pub fn weighted_overall(stats: impl IntoIterator<Item = CategoryStat>) -> f64 {
    let (sum, count) = stats.into_iter().fold((0.0, 0usize), |(s, c), st| {
        (s + st.mean * st.count as f64, c + st.count)
    });
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn aggregate(
    ratings: &RatingMatrix,
    bank: &[QuestionItem],
) -> Result<CategoryReport, StatsError> {
    let categories: HashMap<&str, Category> =
        bank.iter().map(|q| (q.id.as_str(), q.category)).collect();
    let mut sums: BTreeMap<Category, (f64, usize)> = BTreeMap::new();
    for (question, score) in ratings.question_scores() {
        let category = categories
            .get(question)
            .ok_or_else(|| StatsError::UnknownQuestion(question.to_string()))?;
        let entry = sums.entry(*category).or_default();
        entry.0 += score;
        entry.1 += 1;
    }
    let per_category: BTreeMap<Category, CategoryStat> = sums
        .into_iter()
        .map(|(c, (sum, count))| {
            (
                c,
                CategoryStat {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    if per_category.is_empty() {
        return Err(StatsError::IncompleteMatrix("no ratings".into()));
    }
    let overall = weighted_overall(per_category.values().copied());
    Ok(CategoryReport {
        per_category,
        overall,
    })
}

/// Upper-inclusive grade bands; anything above the last bound gets `fallback`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeBands {
    pub bands: Vec<(f64, String)>,
    pub fallback: String,
}

impl Default for GradeBands {
    fn default() -> Self {
        GradeBands {
            bands: vec![
                (1.5, "A".into()),
                (2.5, "B".into()),
                (3.5, "C".into()),
                (4.5, "D".into()),
            ],
            fallback: "F".into(),
        }
    }
}

pub fn grade_band(overall: f64, bands: &GradeBands) -> Result<String, StatsError> {
    if !(1.0..=5.0).contains(&overall) {
        return Err(StatsError::OutOfRange(overall));
    }
    Ok(bands
        .bands
        .iter()
        .find(|(upper, _)| overall <= *upper)
        .map(|(_, g)| g.clone())
        .unwrap_or_else(|| bands.fallback.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub tau_b: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

pub fn agreement(ratings: &RatingMatrix, level: f64) -> Result<AgreementReport, StatsError> {
    let tau_b = kendall_tau_b(&ratings.rater_scores(0), &ratings.rater_scores(1))?;
    let n = ratings.questions().len();
    let (ci_low, ci_high) = tau_confidence_interval(tau_b, n, level)?;
    Ok(AgreementReport {
        tau_b,
        ci_low,
        ci_high,
        n,
    })
}

/// Full evaluation output, as emitted by `ea eval`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub tau_b: f64,
    pub ci: [f64; 2],
    pub ci_level: f64,
    pub ci_method: &'static str,
    pub percent: f64,
    pub n: usize,
    pub categories: BTreeMap<Category, CategoryStat>,
    pub overall: f64,
    pub grade: String,
}

pub fn evaluate(
    ratings: &RatingMatrix,
    bank: &[QuestionItem],
    level: f64,
    bands: &GradeBands,
) -> Result<EvaluationReport, StatsError> {
    let agreement = agreement(ratings, level)?;
    let categories = aggregate(ratings, bank)?;
    let grade = grade_band(categories.overall, bands)?;
    Ok(EvaluationReport {
        tau_b: agreement.tau_b,
        ci: [agreement.ci_low, agreement.ci_high],
        ci_level: level,
        ci_method: "normal approximation, null variance",
        percent: agreement.tau_b * 100.0,
        n: agreement.n,
        categories: categories.per_category,
        overall: categories.overall,
        grade,
    })
}
