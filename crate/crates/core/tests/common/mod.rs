//! Helpers shared by integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use ea_core::model::{EaArgument, ElementKind, TerminatorKind};
use ea_core::rules::may_connect;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const WORDS: &[&str] = &[
    "pump",
    "valve",
    "sensor",
    "the",
    "is",
    "safe",
    "showing",
    "Unless",
    "But",
    "if",
    "then",
    "->",
    "!",
    "#",
    ":",
    "[x]",
    "→",
    "Überdruck",
    "\"quoted\"",
    "50ms",
    "A->B",
    "?",
    "ok",
    "reads",
    "within",
    "limits",
];

fn id_prefix(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::Claim => "C",
        ElementKind::Evidence => "E",
        ElementKind::Context => "Cx",
        ElementKind::InferenceRule => "IR",
        ElementKind::Strategy => "S",
        ElementKind::RebuttingDefeater => "R",
        ElementKind::UnderminingDefeater => "UM",
        ElementKind::UndercuttingDefeater => "UC",
    }
}

pub fn random_text<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..8);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random argument that is legal by construction: every edge is an allowed
/// adjacency, acyclic, and every terminator sits on a kind that accepts it.
/// Texts are arbitrary, so lint warnings are expected.
pub fn random_argument<R: Rng>(rng: &mut R, max_elements: usize) -> EaArgument {
    let mut arg = EaArgument::new();
    arg.add_element("C1", ElementKind::Claim, &random_text(rng))
        .unwrap();
    let extra = rng.gen_range(0..max_elements.max(1));
    for i in 0..extra {
        let kind = *ElementKind::ALL.choose(rng).unwrap();
        let sep = ["", ".", "_"][rng.gen_range(0..3)];
        let id = format!("{}{sep}{}", id_prefix(kind), i + 2);
        arg.add_element(&id, kind, &random_text(rng)).unwrap();
        let parents: Vec<String> = arg
            .elements()
            .filter(|e| e.id != id && may_connect(e.kind, kind))
            .map(|e| e.id.clone())
            .collect();
        if let Some(p) = parents.choose(rng) {
            arg.connect(p, &id).unwrap();
        }
    }
    let ids: Vec<(String, ElementKind)> = arg.elements().map(|e| (e.id.clone(), e.kind)).collect();
    for _ in 0..rng.gen_range(0..=ids.len()) {
        let (a, ka) = ids.choose(rng).unwrap();
        let (b, kb) = ids.choose(rng).unwrap();
        if may_connect(*ka, *kb) && !arg.has_edge(a, b) {
            let _ = arg.connect(a, b);
        }
    }
    for (id, kind) in &ids {
        if rng.gen_bool(0.3) {
            let t = *TerminatorKind::ALL.choose(rng).unwrap();
            if t.attaches_to(*kind) {
                arg.attach_terminator(id, t).unwrap();
            }
        }
    }
    arg
}
