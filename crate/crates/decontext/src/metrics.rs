//! SARI scoring of rewrites against a single gold reference.
//!
//! SARI compares the unigram edits a system made to the source against the
//! edits the reference made: tokens added (`P \ S` vs `R \ S`), kept
//! (`P ∩ S` vs `R ∩ S`), and deleted (`S \ P` vs `S \ R`), each scored as an
//! F1. Scoring is set-based (token types, not counts) over the shared
//! tokenizer, with explicit conventions for the degenerate empty-set cases:
//! precision/recall are 1 when the corresponding edit set is empty.
//!
//! `sari_add` is the headline metric: did the system add the clarifying
//! tokens the reference added?

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::retrieval::tokenize;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SariScore {
    pub add_f1: f64,
    pub keep_f1: f64,
    pub delete_f1: f64,
    pub sari: f64,
}

pub fn unigram_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// F1 between two edit sets. Empty predicted set gives precision 1; empty
/// reference set gives recall 1; harmonic mean is 0 when both P and R are 0.
fn edit_f1(predicted: &BTreeSet<String>, reference: &BTreeSet<String>) -> f64 {
    let overlap = predicted.intersection(reference).count() as f64;
    let precision = if predicted.is_empty() {
        1.0
    } else {
        overlap / predicted.len() as f64
    };
    let recall = if reference.is_empty() {
        1.0
    } else {
        overlap / reference.len() as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn sari_add(source: &str, prediction: &str, reference: &str) -> f64 {
    let s = unigram_set(source);
    let p = unigram_set(prediction);
    let r = unigram_set(reference);
    let add_p: BTreeSet<String> = p.difference(&s).cloned().collect();
    let add_r: BTreeSet<String> = r.difference(&s).cloned().collect();
    edit_f1(&add_p, &add_r)
}

pub fn sari_full(source: &str, prediction: &str, reference: &str) -> SariScore {
    let s = unigram_set(source);
    let p = unigram_set(prediction);
    let r = unigram_set(reference);

    let add_p: BTreeSet<String> = p.difference(&s).cloned().collect();
    let add_r: BTreeSet<String> = r.difference(&s).cloned().collect();
    let keep_p: BTreeSet<String> = p.intersection(&s).cloned().collect();
    let keep_r: BTreeSet<String> = r.intersection(&s).cloned().collect();
    let del_p: BTreeSet<String> = s.difference(&p).cloned().collect();
    let del_r: BTreeSet<String> = s.difference(&r).cloned().collect();

    let add_f1 = edit_f1(&add_p, &add_r);
    let keep_f1 = edit_f1(&keep_p, &keep_r);
    let delete_f1 = edit_f1(&del_p, &del_r);
    SariScore {
        add_f1,
        keep_f1,
        delete_f1,
        sari: (add_f1 + keep_f1 + delete_f1) / 3.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_record: BTreeMap<String, SariScore>,
    pub mean_add_f1: f64,
    pub mean_sari: f64,
    pub transparency_error_rate: f64,
    pub n: usize,
    /// Results that had no gold rewrite and were excluded from the means.
    pub excluded: usize,
    /// Reserved for externally computed semantic-similarity scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_similarity: Option<BTreeMap<String, f64>>,
}

/// One scoreable prediction: the raw rewrite (brackets included — they
/// tokenize away) plus whether it failed transparency validation.
pub struct ScoredPrediction<'a> {
    pub snippet_id: &'a str,
    pub source: &'a str,
    pub rewrite_raw: &'a str,
    pub transparency_failed: bool,
}

pub fn evaluate_run<'a, I>(predictions: I, gold: &BTreeMap<String, crate::corpus::GoldAnnotation>) -> EvalReport
where
    I: IntoIterator<Item = ScoredPrediction<'a>>,
{
    let mut per_record = BTreeMap::new();
    let mut excluded = 0usize;
    let mut failures = 0usize;
    for pred in predictions {
        let Some(annotation) = gold.get(pred.snippet_id) else {
            excluded += 1;
            continue;
        };
        let score = sari_full(pred.source, pred.rewrite_raw, &annotation.rewrite);
        per_record.insert(pred.snippet_id.to_string(), score);
        if pred.transparency_failed {
            failures += 1;
        }
    }
    let n = per_record.len();
    let mean = |f: fn(&SariScore) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_record.values().map(f).sum::<f64>() / n as f64
        }
    };
    EvalReport {
        mean_add_f1: mean(|s| s.add_f1),
        mean_sari: mean(|s| s.sari),
        transparency_error_rate: if n == 0 { 0.0 } else { failures as f64 / n as f64 },
        per_record,
        n,
        excluded,
        semantic_similarity: None,
    }
}
