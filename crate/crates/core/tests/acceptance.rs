//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the default test harness so the verdict lines always reach
//! stdout. Exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

use ea_core::llm::prompt::PROFICIENCY_SYSTEM_PROMPT_SHA256;
use ea_core::llm::session::{question_request, run_with_clock};
use ea_core::llm::{
    default_bank, CannedProvider, Category, ChatProvider, PromptRequest, ProviderError,
    ReplayProvider, Settings, PROFICIENCY_SYSTEM_PROMPT,
};
use ea_core::model::{EaArgument, ElementKind, TerminatorKind};
use ea_core::rules::{check_text, validate};
use ea_core::service::{router, ReviewStore, StoredArgument};
use ea_core::stats::{
    evaluate, grade_band, kendall_tau_b, weighted_overall, CategoryStat, GradeBands, RatingMatrix,
};
use ea_core::{parse, serialize};

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. Category aggregation and grade

/// Per-question scores (each the mean of two raters) and the rater pairs producing them.
fn rater_pair(score: f64) -> (i64, i64) {
    match (score * 2.0) as i64 {
        2 => (1, 1),
        3 => (1, 2),
        4 => (2, 2),
        5 => (2, 3),
        other => panic!("no pair for {other}"),
    }
}

fn criterion_1() -> Outcome {
    const OVERALL_TOL: f64 = 0.02;
    const CATEGORY_TOL: f64 = 0.01;
    // Sums 9, 12.5 and 9.5 give means 1.125, 1.786 and 1.357: the closest a
    // half-point grid over 7 questions gets to the published 1.78 and 1.35.
    let design: [(&str, usize, &[f64]); 3] = [
        ("S", 8, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0]),
        ("M", 7, &[1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 2.5]),
        ("G", 7, &[1.0, 1.0, 1.0, 1.0, 1.5, 2.0, 2.0]),
    ];
    let mut csv = String::from("question_id,rater_id,score\n");
    let mut flat = Vec::new();
    for (prefix, count, scores) in design {
        assert_eq!(scores.len(), count);
        for (i, &s) in scores.iter().enumerate() {
            let (a, b) = rater_pair(s);
            csv.push_str(&format!(
                "{prefix}{},alice,{a}\n{prefix}{},bob,{b}\n",
                i + 1,
                i + 1
            ));
            flat.push(s);
        }
    }
    let matrix = RatingMatrix::from_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
    let report = evaluate(&matrix, &default_bank(), 0.95, &GradeBands::default())
        .map_err(|e| e.to_string())?;

    let published = [
        (Category::Structural, 1.125),
        (Category::Semantic, 1.78),
        (Category::Generation, 1.35),
    ];
    for (cat, want) in published {
        let got = report.categories[&cat].mean;
        check((got - want).abs() <= CATEGORY_TOL, || {
            format!("{cat:?} mean {got} vs {want}")
        })?;
    }
    let plain_mean = flat.iter().sum::<f64>() / flat.len() as f64;
    check((report.overall - plain_mean).abs() < 1e-12, || {
        format!(
            "weighted overall {} != flat mean {plain_mean}",
            report.overall
        )
    })?;
    check((report.overall - 1.40).abs() <= OVERALL_TOL, || {
        format!("overall {}", report.overall)
    })?;
    check(report.grade == "A", || format!("grade {}", report.grade))?;

    // The published (rounded) category means themselves.
    let from_table = weighted_overall([
        CategoryStat {
            mean: 1.125,
            count: 8,
        },
        CategoryStat {
            mean: 1.78,
            count: 7,
        },
        CategoryStat {
            mean: 1.35,
            count: 7,
        },
    ]);
    check((from_table - 1.40).abs() <= OVERALL_TOL, || {
        format!("table overall {from_table}")
    })?;
    check(
        grade_band(from_table, &GradeBands::default()).as_deref() == Ok("A"),
        || "table grade".into(),
    )?;

    Ok(format!(
        "category means {:.3}/{:.3}/{:.3}, overall {:.4} (table means give {:.4}), |Δ| ≤ {OVERALL_TOL}, grade {}",
        report.categories[&Category::Structural].mean,
        report.categories[&Category::Semantic].mean,
        report.categories[&Category::Generation].mean,
        report.overall,
        from_table,
        report.grade
    ))
}

// ---------------------------------------------------------------------------
// 2. Kendall tau-b against enumeration

fn brute_tau_b(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = (x[i] - x[j]).signum();
            let sy = (y[i] - y[j]).signum();
            tx += (sx == 0) as i64;
            ty += (sy == 0) as i64;
            match sx * sy {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (c - d) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
}

fn criterion_2() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a0b);
    let mut worst = 0.0f64;
    let mut tied = 0;
    for trial in 0..200 {
        let x: Vec<i64> = (0..22).map(|_| rng.gen_range(1..=5)).collect();
        let y: Vec<i64> = (0..22).map(|_| rng.gen_range(1..=5)).collect();
        let fast = kendall_tau_b(&x, &y).map_err(|e| format!("trial {trial}: {e}"))?;
        let slow = brute_tau_b(&x, &y);
        worst = worst.max((fast - slow).abs());
        check((fast - slow).abs() <= TOL, || {
            format!("trial {trial}: {fast} vs {slow}")
        })?;
        tied += (x.iter().collect::<BTreeSet<_>>().len() < 22) as usize;

        let same = kendall_tau_b(&x, &x).map_err(|e| e.to_string())?;
        check(same == 1.0, || {
            format!("trial {trial}: identical vectors gave {same}")
        })?;
    }
    for trial in 0..20 {
        let mut x: Vec<i64> = (1..=22).collect();
        x.shuffle(&mut rng);
        let y: Vec<i64> = x.iter().map(|v| 100 - v).collect();
        let rev = kendall_tau_b(&x, &y).map_err(|e| e.to_string())?;
        check(rev == -1.0, || format!("reversal {trial} gave {rev}"))?;
    }
    Ok(format!("200 vectors (n=22, {tied} with ties), max |fast - oracle| = {worst:.1e} ≤ {TOL:.0e}; identity 1.0, reversal -1.0 exact"))
}

// ---------------------------------------------------------------------------
// 3. Rule engine completeness

const KINDS: [ElementKind; 8] = [
    ElementKind::Claim,
    ElementKind::Evidence,
    ElementKind::Context,
    ElementKind::InferenceRule,
    ElementKind::RebuttingDefeater,
    ElementKind::UnderminingDefeater,
    ElementKind::UndercuttingDefeater,
    ElementKind::Strategy,
];

/// Legal adjacency, rows and columns in `KINDS` order.
const ADJACENCY: [[u8; 8]; 8] = [
    //C  E  Cx IR R  UM UC S
    [0, 0, 1, 1, 1, 0, 0, 1], // Claim
    [0, 1, 0, 1, 1, 1, 1, 0], // Evidence
    [1, 0, 0, 0, 0, 0, 0, 0], // Context
    [1, 1, 0, 0, 1, 1, 1, 0], // InferenceRule
    [1, 1, 0, 1, 0, 0, 0, 1], // Rebutting
    [0, 1, 0, 1, 0, 0, 0, 1], // Undermining
    [0, 1, 0, 1, 0, 0, 0, 1], // Undercutting
    [1, 0, 0, 0, 1, 1, 1, 0], // Strategy
];

/// Terminator attachment, rows in `KINDS` order, columns AssumedOK, IsOK.
const ATTACH: [[u8; 2]; 8] = [
    [1, 1], // Claim
    [1, 1], // Evidence
    [0, 0], // Context
    [0, 1], // InferenceRule
    [1, 0], // Rebutting
    [1, 0], // Undermining
    [1, 0], // Undercutting
    [0, 0], // Strategy
];

fn sample_text(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::Claim => "The pump is safe",
        ElementKind::Evidence => "Test log showing no leaks",
        ElementKind::Context => "Plant B",
        ElementKind::InferenceRule => "If no hazard remains then the pump is safe",
        ElementKind::RebuttingDefeater | ElementKind::UndercuttingDefeater => {
            "Unless the pump overheats"
        }
        ElementKind::UnderminingDefeater => "But the log is partial",
        ElementKind::Strategy => "Argue over each hazard",
    }
}

fn codes(text: &str) -> Result<Vec<&'static str>, String> {
    let arg = parse(text).map_err(|e| format!("fixture does not parse: {e:?}"))?;
    Ok(validate(&arg).into_iter().map(|d| d.code).collect())
}

const BASE: &str = "C1 [Claim]: The pump is safe\n\
    IR1 [InferenceRule]: If no hazard remains then the pump is safe\n\
    E1 [Evidence]: Test log showing no leaks\n\
    C1 -> IR1\nIR1 -> E1\n";

fn criterion_3() -> Outcome {
    // (row, fixture appended to BASE, expected codes)
    let rows: [(&str, &str, &[&str]); 20] = [
        ("Claim", "Cx1 [Context]: Plant B\nC1 -> Cx1", &[]),
        ("Claim", "C2 [Claim]: Is the pump safe?", &["M005"]),
        ("Claim", "E2 [Evidence]: Log showing x\nC1 -> E2", &["S001"]),
        ("Evidence", "UM1 [Undermining]: But the log is partial\nE1 -> UM1", &[]),
        ("Evidence", "E2 [Evidence]: Raw leak log\nE1 -> E2", &["M004"]),
        ("Evidence", "Cx1 [Context]: Plant B\nE1 -> Cx1", &["S001"]),
        ("Context", "Cx1 [Context]: Plant B\nC1 -> Cx1", &[]),
        ("Context", "Cx1 [Context]: Plant B\nC1 -> Cx1\nCx1 -> E1", &["S001"]),
        ("InferenceRule", "UC1 [Undercutting]: Unless the log is forged\nIR1 -> UC1", &[]),
        ("InferenceRule", "IR2 [InferenceRule]: The pump is safe because it was tested\nC1 -> IR2", &["M006"]),
        ("InferenceRule", "Cx1 [Context]: Plant B\nIR1 -> Cx1", &["S001"]),
        ("Undercutting", "UC1 [Undercutting]: The tests were unrepresentative\nIR1 -> UC1", &["M002"]),
        ("Undercutting", "UC1 [Undercutting]: Unless the tests were unrepresentative\nC1 -> UC1", &["S001"]),
        ("Undermining", "UM1 [Undermining]: The log is incomplete\nE1 -> UM1", &["M003"]),
        ("Undermining", "UM1 [Undermining]: But the log is incomplete\nC1 -> UM1", &["S001"]),
        ("Rebutting", "R1 [Rebutting]: The pump overheats\nC1 -> R1", &["M001"]),
        ("Rebutting", "Cx1 [Context]: Plant B\nR1 [Rebutting]: Unless the pump overheats\nC1 -> Cx1\nCx1 -> R1", &["S001"]),
        ("AssumedOK", "R1 [Rebutting]: Unless the pump overheats\nC1 -> R1\nR1 ! AssumedOK", &[]),
        ("AssumedOK", "Cx1 [Context]: Plant B\nC1 -> Cx1\nCx1 ! AssumedOK", &["S002"]),
        ("IsOK", "R1 [Rebutting]: Unless the pump overheats\nC1 -> R1\nR1 ! IsOK", &["S002"]),
    ];
    let extra_pass: [(&str, &str); 4] = [
        (
            "Undermining",
            "UM1 [Undermining]: But the log is incomplete\nE1 -> UM1",
        ),
        (
            "Undercutting",
            "UC1 [Undercutting]: Unless the tests were unrepresentative\nIR1 -> UC1",
        ),
        (
            "Rebutting",
            "R1 [Rebutting]: Unless the pump overheats\nC1 -> R1",
        ),
        ("IsOK", "IR1 ! IsOK"),
    ];
    check(codes(BASE)?.is_empty(), || {
        "base fixture is not clean".into()
    })?;
    let mut passing = BTreeSet::new();
    let mut violating = BTreeSet::new();
    for (row, fixture, want) in rows
        .iter()
        .copied()
        .chain(extra_pass.iter().map(|&(r, f)| (r, f, &[][..])))
    {
        let got = codes(&format!("{BASE}{fixture}\n"))?;
        check(got == want, || {
            format!("{row} fixture {fixture:?}: got {got:?}, want {want:?}")
        })?;
        if want.is_empty() {
            passing.insert(row);
        } else {
            violating.insert(row);
        }
    }
    check(passing.len() == 9 && violating.len() == 9, || {
        format!("rows covered: passing {passing:?}, violating {violating:?}")
    })?;

    // 8×8 adjacency sweep.
    let mut legal = 0;
    for (i, &a) in KINDS.iter().enumerate() {
        for (j, &b) in KINDS.iter().enumerate() {
            check(ADJACENCY[i][j] == ADJACENCY[j][i], || {
                "oracle table asymmetric".into()
            })?;
            let doc = format!(
                "P [{}]: {}\nQ [{}]: {}\nP -> Q\n",
                a.short_name(),
                sample_text(a),
                b.short_name(),
                sample_text(b)
            );
            let arg = parse(&doc).map_err(|e| format!("{e:?}"))?;
            let flagged = validate(&arg)
                .iter()
                .any(|d| d.code == "S001" && d.subject.to_string() == "P->Q");
            let expect_legal = ADJACENCY[i][j] == 1;
            legal += expect_legal as usize;
            check(flagged != expect_legal, || {
                format!(
                    "{} -> {}: S001 {flagged}, table says legal={expect_legal}",
                    a.name(),
                    b.name()
                )
            })?;
        }
    }
    check(legal == 29, || format!("{legal} legal ordered pairs"))?;

    // 8×2 terminator sweep, through both the model API and the lenient reader.
    for (i, &k) in KINDS.iter().enumerate() {
        for (j, t) in [TerminatorKind::AssumedOk, TerminatorKind::IsOk]
            .into_iter()
            .enumerate()
        {
            let expect = ATTACH[i][j] == 1;
            let mut arg = EaArgument::new();
            arg.add_element("X1", k, sample_text(k)).unwrap();
            let accepted = arg.attach_terminator("X1", t).is_ok();
            check(accepted == expect, || {
                format!("attach {t:?} to {}: {accepted}", k.name())
            })?;
            let doc = format!(
                "X1 [{}]: {}\nX1 ! {}\n",
                k.short_name(),
                sample_text(k),
                t.text_name()
            );
            let arg = parse(&doc).map_err(|e| format!("{e:?}"))?;
            let s002 = validate(&arg).iter().any(|d| d.code == "S002");
            check(s002 != expect, || {
                format!("S002 for {t:?} on {}: {s002}", k.name())
            })?;
        }
    }
    Ok(format!(
        "{} row fixtures exact; 64 adjacency pairs ({legal} legal) and 16 terminator pairs match, 0 discrepancies",
        rows.len() + extra_pass.len()
    ))
}

// ---------------------------------------------------------------------------
// 4. Lexical checks

fn criterion_4() -> Outcome {
    let cases: [(ElementKind, &str, &[&str], &[&str]); 4] = [
        (
            ElementKind::RebuttingDefeater,
            "M001",
            &[
                "Unless the sensor fails",
                "Unless the operator overrides the interlock",
                "  Unless, during maintenance, the guard is removed",
            ],
            &[
                "The sensor fails",
                "If the sensor fails",
                "Unlessthe sensor fails",
            ],
        ),
        (
            ElementKind::UndercuttingDefeater,
            "M002",
            &[
                "Unless the test rig differs from the field setup",
                "Unless the rule ignores common-cause failures",
                "Unless: the premises are correlated",
            ],
            &[
                "The test rig differs",
                "But the rule ignores common-cause failures",
                "It holds unless it rains",
            ],
        ),
        (
            ElementKind::UnderminingDefeater,
            "M003",
            &[
                "But the data is stale",
                "But the log covers only one shift",
                "But, the calibration expired",
            ],
            &[
                "The data is stale",
                "Unless the data is stale",
                "Butter residue fouled the probe",
            ],
        ),
        (
            ElementKind::Evidence,
            "M004",
            &[
                "Test report showing shutdown within 50ms",
                "Audit log showing no unauthorised access",
                "Field data showing 0 failures in 10^6 hours",
            ],
            &[
                "Shutdown test report",
                "Report shows shutdown within 50ms",
                "Report demonstrating shutdown",
            ],
        ),
    ];
    let mut count = 0;
    for (kind, code, good, bad) in cases {
        for text in good {
            let got = check_text(kind, text);
            check(got.is_empty(), || {
                format!("{} {text:?} flagged {:?}", kind.name(), got)
            })?;
            count += 1;
        }
        for text in bad {
            let got: Vec<_> = check_text(kind, text).into_iter().map(|d| d.code).collect();
            check(got == [code], || {
                format!("{} {text:?}: got {got:?}, want [{code}]", kind.name())
            })?;
            count += 1;
        }
    }
    Ok(format!(
        "{count} cases (3 positive + 3 negative for each of M001, M002, M003, M004)"
    ))
}

// ---------------------------------------------------------------------------
// 5. Parser round-trip

fn criterion_5() -> Outcome {
    let dir = common::fixtures_dir();
    let mut names: Vec<_> = fs::read_dir(dir.join("corpus"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    check(names.len() == 20, || {
        format!("corpus has {} files", names.len())
    })?;
    for name in &names {
        let source =
            fs::read_to_string(dir.join("corpus").join(name)).map_err(|e| e.to_string())?;
        let golden =
            fs::read_to_string(dir.join("golden").join(name)).map_err(|e| e.to_string())?;
        let arg = parse(&source).map_err(|e| format!("{name:?}: {e:?}"))?;
        let text = serialize(&arg);
        check(text == golden, || {
            format!("{name:?}: serializer output differs from golden")
        })?;
        let again = parse(&text).map_err(|e| format!("{name:?} canonical: {e:?}"))?;
        check(again == arg, || {
            format!("{name:?}: parse(serialize(a)) != a")
        })?;
        check(serialize(&again) == golden, || {
            format!("{name:?}: not idempotent")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e71a1);
    let mut elements = 0;
    for i in 0..500 {
        let arg = common::random_argument(&mut rng, 14);
        elements += arg.len();
        let text = serialize(&arg);
        let back = parse(&text).map_err(|e| format!("random #{i}: {e:?}\n{text}"))?;
        check(back == arg, || {
            format!("random #{i} does not round-trip:\n{text}")
        })?;
        check(serialize(&back) == text, || {
            format!("random #{i}: output not byte-stable")
        })?;
    }
    Ok(format!("20 corpus files match goldens byte-for-byte; 500 random arguments ({elements} elements) round-trip"))
}

// ---------------------------------------------------------------------------
// 6. Determinism and replay

fn criterion_6() -> Outcome {
    let bank = default_bank();
    let settings = Settings::default();
    let mut canned = CannedProvider::new();
    for q in &bank {
        canned.insert(
            &question_request(q, &settings),
            format!("Answer to {}", q.id),
        );
    }
    let mut tick = 0;
    let first = run_with_clock(&bank, &canned, &settings, || {
        tick += 1;
        format!("2026-01-01T00:00:{tick:02}Z")
    })
    .map_err(|e| e.to_string())?;
    let second = run_with_clock(&bank, &canned, &settings, || {
        "2027-06-30T12:00:00Z".to_string()
    })
    .map_err(|e| e.to_string())?;
    check(first.to_json() != second.to_json(), || {
        "timestamps should differ between runs".into()
    })?;
    let a = first.without_timestamps().to_json();
    check(a == second.without_timestamps().to_json(), || {
        "transcripts differ beyond timestamps".into()
    })?;

    let replay = ReplayProvider::new(&first);
    let replayed =
        run_with_clock(&bank, &replay, &settings, String::new).map_err(|e| e.to_string())?;
    check(replayed.without_timestamps().to_json() == a, || {
        "replay transcript differs".into()
    })?;

    let mut drifts = 0;
    let variants = [
        Settings {
            seed: settings.seed + 1,
            ..settings.clone()
        },
        Settings {
            temperature: 0.7,
            ..settings.clone()
        },
        Settings {
            model: "other-model".into(),
            ..settings.clone()
        },
    ];
    for drifted in &variants {
        let req = question_request(&bank[0], drifted);
        check(
            matches!(replay.complete(&req), Err(ProviderError::PromptDrift(_))),
            || format!("drifted settings {drifted:?} were answered"),
        )?;
        drifts += 1;
    }
    let mut edited = bank[3].clone();
    edited.text.push(' ');
    let req = question_request(&edited, &settings);
    check(
        matches!(replay.complete(&req), Err(ProviderError::PromptDrift(_))),
        || "edited question answered".into(),
    )?;
    let req = PromptRequest::new("another system prompt", bank[0].text.clone(), &settings);
    check(
        matches!(replay.complete(&req), Err(ProviderError::PromptDrift(_))),
        || "edited system prompt answered".into(),
    )?;
    drifts += 2;
    Ok(format!("{} entries identical modulo timestamps; replay reproduces them and rejects {drifts}/{drifts} drifted prompts", first.entries.len()))
}

// ---------------------------------------------------------------------------
// 7. Question bank and system prompt

fn criterion_7() -> Outcome {
    let bank = default_bank();
    check(bank.len() == 22, || format!("{} items", bank.len()))?;
    let mut split = BTreeMap::new();
    for q in &bank {
        *split.entry(q.category).or_insert(0) += 1;
    }
    let split: Vec<usize> = [
        Category::Structural,
        Category::Semantic,
        Category::Generation,
    ]
    .iter()
    .map(|c| split.get(c).copied().unwrap_or(0))
    .collect();
    check(split == [8, 7, 7], || format!("split {split:?}"))?;

    let verbatim = [
        "What are the different types of defeaters in Eliminative Argumentation?",
        "How should a claim be structured in Eliminative Argumentation? i.e., mention whether it can be in the form of noun-phrase, verb-phrase or predicate.",
        "Generate me a sample Claim and a Rebutting defeater that defeats it. Show it in structured prose.",
    ];
    for q in verbatim {
        check(bank.iter().any(|item| item.text == q), || {
            format!("missing verbatim question {q:?}")
        })?;
    }

    const PINNED: &str = "c188bb3bd144ff8f474277320aec03ba99f9ac409b87eddc7eec21646a78f7f1";
    let fixture =
        fs::read(common::fixtures_dir().join("system_prompt.txt")).map_err(|e| e.to_string())?;
    let on_disk = hex::encode(Sha256::digest(&fixture));
    let compiled = hex::encode(Sha256::digest(PROFICIENCY_SYSTEM_PROMPT.as_bytes()));
    check(on_disk == PINNED, || format!("fixture hash {on_disk}"))?;
    check(
        compiled == PINNED && PROFICIENCY_SYSTEM_PROMPT_SHA256 == PINNED,
        || "compiled prompt hash".into(),
    )?;
    Ok(format!(
        "22 items split 8/7/7, 3 verbatim questions present, prompt sha256 {}…",
        &PINNED[..12]
    ))
}

// ---------------------------------------------------------------------------
// 8. Graft safety and log replay through the HTTP service

/// Answers defeater prompts with a random mix of well- and ill-formed items.
struct ScriptedProvider(Mutex<ChaCha8Rng>);

impl ChatProvider for ScriptedProvider {
    fn complete(&self, _request: &PromptRequest) -> Result<String, ProviderError> {
        let mut rng = self.0.lock().unwrap();
        if rng.gen_bool(0.05) {
            return Err(ProviderError::Transport("scripted outage".into()));
        }
        let n = rng.gen_range(1..=3);
        let mut out = String::new();
        for i in 1..=n {
            let lead = ["Unless", "But", "Perhaps"].choose(&mut *rng).unwrap();
            out.push_str(&format!(
                "{i}. Reasoning: step {i}\n   Defeater: {lead} {}\n",
                common::random_text(&mut *rng)
            ));
        }
        Ok(out)
    }
}

struct Client {
    app: axum::Router,
    rt: tokio::runtime::Runtime,
}

impl Client {
    fn call(
        &self,
        method: &str,
        uri: &str,
        if_match: Option<u64>,
        body: Body,
    ) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(rev) = if_match {
            req = req.header(header::IF_MATCH, format!("\"{rev}\""));
        }
        req = req.header(header::CONTENT_TYPE, "application/json");
        let req = req.body(body).unwrap();
        self.rt.block_on(async {
            let resp = self.app.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            (
                status,
                serde_json::from_slice(&bytes).unwrap_or(Value::Null),
            )
        })
    }

    fn json(
        &self,
        method: &str,
        uri: &str,
        if_match: Option<u64>,
        body: Value,
    ) -> (StatusCode, Value) {
        self.call(method, uri, if_match, Body::from(body.to_string()))
    }
}

fn s_codes(arg: &EaArgument) -> BTreeSet<(String, String)> {
    validate(arg)
        .into_iter()
        .filter(|d| d.is_structural())
        .map(|d| (d.code.to_string(), d.subject.to_string()))
        .collect()
}

fn run_sequence(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let provider = Arc::new(ScriptedProvider(Mutex::new(ChaCha8Rng::seed_from_u64(
        seed ^ 0xfeed,
    ))));
    let store = Arc::new(
        ReviewStore::open(dir.path(), provider, Settings::default()).map_err(|e| e.to_string())?,
    );
    let client = Client {
        app: router(store),
        rt: tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap(),
    };

    let initial = common::random_argument(&mut rng, 8);
    let (status, created) =
        client.call("POST", "/arguments", None, Body::from(serialize(&initial)));
    check(status == StatusCode::CREATED, || {
        format!("create: {status} {created}")
    })?;
    let id = created["argument_id"].as_str().unwrap().to_string();
    let mut revision = 1u64;
    let mut current = initial;
    let mut candidates: Vec<String> = Vec::new();
    let mut grafts = 0;

    for _ in 0..rng.gen_range(6..14) {
        let stale = rng.gen_bool(0.1);
        let if_match = match rng.gen_range(0..3) {
            0 => None,
            _ if stale => Some(revision + 7),
            _ => Some(revision),
        };
        if candidates.is_empty() || rng.gen_bool(0.35) {
            let targets: Vec<_> = current
                .elements()
                .filter_map(|e| match e.kind {
                    ElementKind::Claim => Some((e.id.clone(), "rebutting")),
                    ElementKind::Evidence => Some((e.id.clone(), "undermining")),
                    ElementKind::InferenceRule => Some((e.id.clone(), "undercutting")),
                    _ => None,
                })
                .collect();
            let (target, kind) = targets.choose(&mut rng).unwrap().clone();
            let (status, body) = client.json(
                "POST",
                &format!("/arguments/{id}/candidates"),
                if_match,
                json!({ "target": target, "kind": kind }),
            );
            match status {
                StatusCode::CREATED => {
                    revision += 1;
                    for c in body["candidates"].as_array().unwrap() {
                        candidates.push(c["id"].as_str().unwrap().to_string());
                    }
                }
                StatusCode::CONFLICT | StatusCode::BAD_GATEWAY => {}
                other => return Err(format!("candidates: unexpected {other} {body}")),
            }
        } else {
            let cid = candidates.choose(&mut rng).unwrap().clone();
            let action = ["Accept", "Refine", "Reject"].choose(&mut rng).unwrap();
            let mut body = json!({ "action": action });
            if *action == "Refine" {
                let lead = ["Unless", "But", "Maybe"].choose(&mut rng).unwrap();
                body["edited_text"] = json!(format!("{lead} {}", common::random_text(&mut rng)));
            }
            let before = s_codes(&current);
            let (status, resp) = client.json(
                "POST",
                &format!("/arguments/{id}/candidates/{cid}/decision"),
                if_match,
                body,
            );
            match status {
                StatusCode::OK => {
                    revision += 1;
                    let text = resp["text"].as_str().unwrap();
                    let next = parse(text).map_err(|e| format!("{e:?}"))?;
                    if *action != "Reject" {
                        check(next.len() == current.len() + 1, || {
                            format!("{action} did not graft")
                        })?;
                        grafts += 1;
                    }
                    let introduced: Vec<_> = s_codes(&next).difference(&before).cloned().collect();
                    check(introduced.is_empty(), || {
                        format!("graft introduced {introduced:?}")
                    })?;
                    current = next;
                }
                StatusCode::CONFLICT | StatusCode::UNPROCESSABLE_ENTITY => {}
                other => return Err(format!("decision: unexpected {other} {resp}")),
            }
        }
        check(
            matches!(client.call("GET", &format!("/arguments/{id}"), None, Body::empty()),
                (StatusCode::OK, ref v) if v["revision"] == json!(revision)),
            || "revision bookkeeping diverged".into(),
        )?;
    }

    let (_, shown) = client.call("GET", &format!("/arguments/{id}"), None, Body::empty());
    let served = shown["text"].as_str().unwrap().to_string();
    check(served == serialize(&current), || {
        "served text differs from tracked state".into()
    })?;

    let raw =
        fs::read_to_string(dir.path().join(format!("{id}.json"))).map_err(|e| e.to_string())?;
    let stored: StoredArgument = serde_json::from_str(&raw).map_err(|e| e.to_string())?;
    let replayed = stored.replay().map_err(|e| e.to_string())?;
    check(serialize(&replayed.argument) == served, || {
        "log replay differs from stored argument".into()
    })?;
    check(replayed.candidates == stored.candidates, || {
        "log replay differs in candidates".into()
    })?;
    check(replayed.revision == stored.revision, || {
        "log replay differs in revision".into()
    })?;

    let (_, log) = client.call("GET", &format!("/arguments/{id}/log"), None, Body::empty());
    check(log["base"] == json!(stored.base), || {
        "log endpoint base".into()
    })?;

    let reopened = ReviewStore::open(
        dir.path(),
        Arc::new(CannedProvider::new()),
        Settings::default(),
    )
    .map_err(|e| e.to_string())?;
    check(
        reopened.get(&id).map(|s| s.text()).ok() == Some(served),
        || "reload differs".into(),
    )?;
    Ok((grafts, stored.log.len()))
}

fn criterion_8() -> Outcome {
    let (mut grafts, mut events) = (0, 0);
    for seq in 0..100 {
        let (g, e) = run_sequence(1000 + seq).map_err(|e| format!("sequence {seq}: {e}"))?;
        grafts += g;
        events += e;
    }
    check(grafts > 50, || format!("only {grafts} grafts exercised"))?;
    Ok(format!("100 sequences, {events} logged events, {grafts} grafts with 0 new S-codes; replay byte-identical"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "category aggregation and grade", criterion_1),
        (2, "Kendall tau-b vs enumeration oracle", criterion_2),
        (3, "rule engine completeness", criterion_3),
        (4, "lexical prefix and evidence checks", criterion_4),
        (5, "parser round-trip and golden output", criterion_5),
        (6, "deterministic sessions and replay drift", criterion_6),
        (7, "question bank and system prompt", criterion_7),
        (8, "graft safety and event-log replay", criterion_8),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
