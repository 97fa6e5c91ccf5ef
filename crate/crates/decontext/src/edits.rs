//! Bracket-edit parsing and transparency validation.
//!
//! A rewrite is supposed to delineate every added piece of text in square
//! brackets, leave the original tokens intact (deletions are allowed), and
//! keep the sentence count unchanged. This module parses the bracketed spans
//! out of a rewrite, aligns the remaining text against the original snippet
//! with a token-level LCS, and reports:
//!
//! - insertions (bracketed spans that are new text),
//! - citation markers (bracketed spans like `[42]` that already appear in
//!   the original and are kept as-is),
//! - deletions (original tokens missing from the rewrite — always permitted,
//!   only reported),
//! - violations (unbracketed rewrite tokens not traceable to the original).
//!
//! First-person pronoun replacements are treated as equivalent during
//! alignment: the rewriting prompt mandates `[REF0]` placeholders and gold
//! annotators write "the authors" unbracketed, so neither counts against the
//! violation budget.

use serde::{Deserialize, Serialize};

use crate::retrieval::tokenize;

/// Unbracketed-token budget under which a rewrite still passes; the prompts
/// explicitly permit grammar fixes, so zero tolerance would fail valid gold.
pub const DEFAULT_TOLERANCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Insertion,
    CitationMarker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSpan {
    pub kind: EditKind,
    pub text: String,
    /// Byte offsets of the `[...]` region in the rewrite, brackets included.
    pub char_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketScan {
    pub spans: Vec<EditSpan>,
    pub cleaned: String,
    pub unbalanced: bool,
}

/// Scans `rewrite` for balanced bracket pairs. Nested brackets are flattened
/// to the outermost pair. A span whose bracketed form appears verbatim in
/// `original` (e.g. a numeric citation `[42]`) is a citation marker and stays
/// in the cleaned text; insertion spans are removed. Unbalanced brackets stop
/// span parsing at the defect and set the flag.
pub fn extract_bracket_spans(rewrite: &str, original: &str) -> BracketScan {
    let mut spans = Vec::new();
    let mut cleaned = String::new();
    let mut unbalanced = false;
    let mut depth = 0usize;
    let mut span_start = 0usize;
    let mut span_text = String::new();

    for (pos, ch) in rewrite.char_indices() {
        match ch {
            '[' => {
                depth += 1;
                if depth == 1 {
                    span_start = pos;
                    span_text.clear();
                } else {
                    span_text.push(ch);
                }
            }
            ']' => {
                if depth == 0 {
                    unbalanced = true;
                    continue;
                }
                depth -= 1;
                if depth == 0 {
                    let end = pos + ch.len_utf8();
                    let bracketed = format!("[{span_text}]");
                    let kind = if !span_text.is_empty() && original.contains(&bracketed) {
                        EditKind::CitationMarker
                    } else {
                        EditKind::Insertion
                    };
                    if kind == EditKind::CitationMarker {
                        cleaned.push_str(&bracketed);
                    }
                    if !span_text.is_empty() {
                        spans.push(EditSpan {
                            kind,
                            text: std::mem::take(&mut span_text),
                            char_range: (span_start, end),
                        });
                    }
                } else {
                    span_text.push(ch);
                }
            }
            _ if depth > 0 => span_text.push(ch),
            _ => cleaned.push(ch),
        }
    }
    if depth > 0 {
        unbalanced = true;
    }
    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    BracketScan {
        spans,
        cleaned,
        unbalanced,
    }
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table
}

/// LCS alignment: original tokens outside the LCS are deletions, cleaned
/// tokens outside it are violations.
pub fn align_subsequence(original: &[String], cleaned: &[String]) -> (Vec<String>, Vec<String>) {
    let table = lcs_table(original, cleaned);
    let mut deleted = Vec::new();
    let mut violations = Vec::new();
    let (mut i, mut j) = (original.len(), cleaned.len());
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && original[i - 1] == cleaned[j - 1] {
            i -= 1;
            j -= 1;
        } else if j > 0 && (i == 0 || table[i][j - 1] >= table[i - 1][j]) {
            violations.push(cleaned[j - 1].clone());
            j -= 1;
        } else {
            deleted.push(original[i - 1].clone());
            i -= 1;
        }
    }
    deleted.reverse();
    violations.reverse();
    (deleted, violations)
}

const FIRST_PERSON: &[&str] = &["we", "our", "us", "ref0"];
const FP_MARKER: &str = "\u{0}fp";

/// Maps first-person pronouns and their sanctioned replacements ("the
/// authors", "[REF0]" remnants) onto one marker token so pronoun replacement
/// does not register as a violation. Applied to both sides of the alignment.
/// Returns (marker-or-token, surface form) pairs; alignment runs on the
/// first element, reports use the second.
fn normalize_pronouns(tokens: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut idx = 0;
    while idx < tokens.len() {
        if tokens[idx] == "the" && idx + 1 < tokens.len() && tokens[idx + 1] == "authors" {
            out.push((FP_MARKER.to_string(), "the authors".to_string()));
            idx += 2;
            continue;
        }
        if FIRST_PERSON.contains(&tokens[idx].as_str()) {
            out.push((FP_MARKER.to_string(), tokens[idx].clone()));
        } else {
            out.push((tokens[idx].clone(), tokens[idx].clone()));
        }
        idx += 1;
    }
    out
}

/// LCS over the marker tokens, surfaces reported.
fn align_pairs(original: &[(String, String)], cleaned: &[(String, String)]) -> (Vec<String>, Vec<String>) {
    let a: Vec<String> = original.iter().map(|(m, _)| m.clone()).collect();
    let b: Vec<String> = cleaned.iter().map(|(m, _)| m.clone()).collect();
    let table = lcs_table(&a, &b);
    let mut deleted = Vec::new();
    let mut violations = Vec::new();
    let (mut i, mut j) = (a.len(), b.len());
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] {
            i -= 1;
            j -= 1;
        } else if j > 0 && (i == 0 || table[i][j - 1] >= table[i - 1][j]) {
            violations.push(cleaned[j - 1].1.clone());
            j -= 1;
        } else {
            deleted.push(original[i - 1].1.clone());
            i -= 1;
        }
    }
    deleted.reverse();
    violations.reverse();
    (deleted, violations)
}

const ABBREVIATIONS: &[&str] = &["al.", "fig.", "figs.", "eq.", "eqs.", "e.g.", "i.e.", "etc.", "cf.", "vs."];

fn preceding_word(text: &str, period_pos: usize) -> String {
    let head = &text[..=period_pos];
    head.rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric() && c != '.')
        .to_lowercase()
}

/// Rule-based sentence counting: a boundary is `.`/`!`/`?` (outside square
/// brackets, not after a guarded abbreviation) followed by optional closing
/// punctuation and either end-of-text or whitespace plus a capital or digit.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut count = 0usize;
    let mut depth = 0usize;
    let mut last_boundary_end = 0usize;
    let mut idx = 0;
    while idx < chars.len() {
        let (pos, ch) = chars[idx];
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            '.' | '!' | '?' if depth == 0 => {
                let guarded = ch == '.' && ABBREVIATIONS.contains(&preceding_word(text, pos).as_str());
                if !guarded {
                    // Skip closers like quotes, parens, brackets after the mark.
                    let mut look = idx + 1;
                    while look < chars.len() && matches!(chars[look].1, '"' | '\'' | ')' | ']' | '.' | '!' | '?') {
                        look += 1;
                    }
                    let at_end = look >= chars.len();
                    let boundary = if at_end {
                        true
                    } else if chars[look].1.is_whitespace() {
                        let mut next = look;
                        while next < chars.len() && chars[next].1.is_whitespace() {
                            next += 1;
                        }
                        next >= chars.len()
                            || chars[next].1.is_uppercase()
                            || chars[next].1.is_ascii_digit()
                            || matches!(chars[next].1, '[' | '"' | '(')
                    } else {
                        false
                    };
                    if boundary {
                        count += 1;
                        last_boundary_end = if at_end { text.len() } else { chars[look].0 };
                        idx = look;
                        continue;
                    }
                }
            }
            _ => {}
        }
        idx += 1;
    }
    if text[last_boundary_end..].trim().chars().any(|c| c.is_alphanumeric()) {
        count += 1;
    }
    count
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransparencyReport {
    pub insertions: Vec<EditSpan>,
    pub deleted_tokens: Vec<String>,
    pub violations: Vec<String>,
    pub unbalanced_brackets: bool,
    pub sentence_count_original: usize,
    pub sentence_count_rewrite: usize,
    pub passes: bool,
}

pub fn check_transparency(original: &str, rewrite: &str, tolerance: usize) -> TransparencyReport {
    let scan = extract_bracket_spans(rewrite, original);
    let original_tokens = normalize_pronouns(&tokenize(original));
    let cleaned_tokens = normalize_pronouns(&tokenize(&scan.cleaned));
    let (deleted_tokens, violations) = align_pairs(&original_tokens, &cleaned_tokens);
    let sentence_count_original = count_sentences(original);
    let sentence_count_rewrite = count_sentences(rewrite);
    let passes = !scan.unbalanced
        && violations.len() <= tolerance
        && sentence_count_original == sentence_count_rewrite;
    TransparencyReport {
        insertions: scan
            .spans
            .into_iter()
            .filter(|s| s.kind == EditKind::Insertion)
            .collect(),
        deleted_tokens,
        violations,
        unbalanced_brackets: scan.unbalanced,
        sentence_count_original,
        sentence_count_rewrite,
        passes,
    }
}
