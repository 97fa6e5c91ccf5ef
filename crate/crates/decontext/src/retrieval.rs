//! Lexical passage retrieval over paper paragraphs.
//!
//! Every paragraph of the source document and the cited documents becomes one
//! passage. Queries are scored with BM25 (`k1 = 1.2`, `b = 0.75` by default);
//! ties are broken by `(doc_id, para_id)` so rankings are deterministic.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::PaperDocument;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build a passage index over an empty corpus")]
    EmptyCorpus,
}

/// Lowercased Unicode letter/digit runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct Passage {
    pub doc_id: String,
    pub para_id: String,
    pub tokens: Vec<String>,
}

/// Immutable BM25 index over paragraphs. Safe to share across query threads.
#[derive(Debug)]
pub struct PassageIndex {
    passages: Vec<Passage>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
}

impl PassageIndex {
    pub fn build<'a, I>(docs: I) -> Result<PassageIndex, RetrievalError>
    where
        I: IntoIterator<Item = &'a PaperDocument>,
    {
        let mut passages = Vec::new();
        for doc in docs {
            for para in &doc.paragraphs {
                passages.push(Passage {
                    doc_id: doc.doc_id.clone(),
                    para_id: para.para_id.clone(),
                    tokens: tokenize(&para.text),
                });
            }
        }
        if passages.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }

        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for passage in &passages {
            let mut seen: Vec<&String> = Vec::new();
            for token in &passage.tokens {
                if !seen.contains(&token) {
                    seen.push(token);
                    *doc_freq.entry(token.clone()).or_insert(0) += 1;
                }
            }
        }
        let total: usize = passages.iter().map(|p| p.tokens.len()).sum();
        let avg_len = total as f64 / passages.len() as f64;

        Ok(PassageIndex {
            passages,
            doc_freq,
            avg_len,
        })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    pub fn avg_passage_len(&self) -> f64 {
        self.avg_len
    }

    pub fn passage(&self, idx: usize) -> &Passage {
        &self.passages[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPassage {
    pub doc_id: String,
    pub para_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

/// Scores a query against every passage; a retriever backend can be swapped
/// in behind this trait without touching the pipeline.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<RankedPassage>;
}

pub struct Bm25Retriever<'a> {
    pub index: &'a PassageIndex,
    pub params: Bm25Params,
}

impl Retriever for Bm25Retriever<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Vec<RankedPassage> {
        retrieve_top_k(self.index, query, k, self.params)
    }
}

fn bm25_score(index: &PassageIndex, query_tokens: &[String], passage: &Passage, params: Bm25Params) -> f64 {
    let n = index.passages.len() as f64;
    let dl = passage.tokens.len() as f64;
    let mut score = 0.0;
    for term in query_tokens {
        let tf = passage.tokens.iter().filter(|t| *t == term).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = index.doc_freq(term) as f64;
        // Non-negative idf variant: ln((N - df + 0.5) / (df + 0.5) + 1)
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        let denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avg_len);
        score += idf * tf * (params.k1 + 1.0) / denom;
    }
    score
}

/// Top-`min(k, passages)` passages by BM25 score. An empty query (after
/// tokenization) yields an empty list.
pub fn retrieve_top_k(index: &PassageIndex, query: &str, k: usize, params: Bm25Params) -> Vec<RankedPassage> {
    let query_tokens = tokenize(query);
    if query_tokens.is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<(f64, &Passage)> = index
        .passages
        .iter()
        .map(|p| (bm25_score(index, &query_tokens, p, params), p))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (&a.1.doc_id, &a.1.para_id).cmp(&(&b.1.doc_id, &b.1.para_id)))
    });
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (score, p))| RankedPassage {
            doc_id: p.doc_id.clone(),
            para_id: p.para_id.clone(),
            score,
            rank: i + 1,
        })
        .collect()
}
