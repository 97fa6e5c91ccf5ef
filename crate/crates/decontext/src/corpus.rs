//! Corpus ingestion and validation.
//!
//! Three line-delimited JSON files describe a dataset: documents, snippets,
//! and gold annotations. Loading is strict about per-line schema (a malformed
//! line is an error carrying its line number) but lenient about referential
//! integrity: dangling references and containment failures are collected into
//! a [`ValidationReport`] instead of aborting, since real gold data is noisy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {source}")]
    MalformedLine {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate key {key:?} at {path}:{line}")]
    DuplicateKey { path: String, line: usize, key: String },
    #[error("unknown condensation mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Paragraph {
    pub para_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PaperDocument {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub paragraphs: Vec<Paragraph>,
}

impl PaperDocument {
    pub fn paragraph(&self, para_id: &str) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.para_id == para_id)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    CitationGraphExplorer,
    ResearchAssistant,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnippetRecord {
    pub snippet_id: String,
    pub text: String,
    pub source_doc: String,
    pub context_para: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    pub application: Application,
    #[serde(default)]
    pub cited_docs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_query: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Define,
    Coref,
    MoreContext,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvidenceRef {
    pub doc_id: String,
    pub para_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GoldQuestion {
    pub question: String,
    pub qtype: QuestionType,
    pub answer: String,
    #[serde(default)]
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GoldAnnotation {
    pub snippet_id: String,
    pub rewrite: String,
    pub questions: Vec<GoldQuestion>,
}

fn load_jsonl<T, F>(path: &Path, key_of: F) -> Result<Vec<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> String,
{
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|source| CorpusError::MalformedLine {
            path: display.clone(),
            line: idx + 1,
            source,
        })?;
        let key = key_of(&record);
        if seen.contains(&key) {
            return Err(CorpusError::DuplicateKey {
                path: display,
                line: idx + 1,
                key,
            });
        }
        seen.push(key);
        records.push(record);
    }
    Ok(records)
}

pub fn load_documents(path: &Path) -> Result<BTreeMap<String, PaperDocument>, CorpusError> {
    let docs: Vec<PaperDocument> = load_jsonl(path, |d: &PaperDocument| d.doc_id.clone())?;
    Ok(docs.into_iter().map(|d| (d.doc_id.clone(), d)).collect())
}

pub fn load_snippets(path: &Path) -> Result<Vec<SnippetRecord>, CorpusError> {
    load_jsonl(path, |s: &SnippetRecord| s.snippet_id.clone())
}

pub fn load_gold(path: &Path) -> Result<BTreeMap<String, GoldAnnotation>, CorpusError> {
    let gold: Vec<GoldAnnotation> = load_jsonl(path, |g: &GoldAnnotation| g.snippet_id.clone())?;
    Ok(gold.into_iter().map(|g| (g.snippet_id.clone(), g)).collect())
}

/// Collapses runs of whitespace and drops figure/table markers so snippets
/// extracted with such references removed still match their source paragraph.
pub fn normalize_for_containment(text: &str) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let mut paren_buf = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                if depth == 1 {
                    paren_buf.clear();
                    continue;
                }
                paren_buf.push(ch);
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if !is_figure_table_ref(&paren_buf) {
                        out.push('(');
                        out.push_str(&paren_buf);
                        out.push(')');
                    }
                    continue;
                }
                paren_buf.push(ch);
            }
            _ if depth > 0 => paren_buf.push(ch),
            _ => out.push(ch),
        }
    }
    if depth > 0 {
        out.push('(');
        out.push_str(&paren_buf);
    }
    let words: Vec<&str> = out
        .split_whitespace()
        .filter(|w| !is_marker_token(w))
        .collect();
    words.join(" ")
}

fn is_figure_table_ref(content: &str) -> bool {
    let trimmed = content.trim();
    trimmed.starts_with('§')
        || ["Figure", "Fig.", "Table", "Tab.", "Section", "Eq."]
            .iter()
            .any(|p| trimmed.starts_with(p))
}

fn is_marker_token(word: &str) -> bool {
    let stripped: String = word.chars().filter(|c| c.is_alphanumeric()).collect();
    ["FIGREF", "TABREF", "SECREF", "INLINEFORM"]
        .iter()
        .any(|p| stripped.starts_with(p))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Finding {
    DanglingSourceDoc { snippet_id: String, doc_id: String },
    DanglingCitedDoc { snippet_id: String, doc_id: String },
    MissingContextPara { snippet_id: String, para_id: String },
    ContainmentFailure { snippet_id: String },
    UnknownGoldSnippet { snippet_id: String },
    DanglingEvidence { snippet_id: String, doc_id: String, para_id: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub snippet_count: usize,
    pub question_count: usize,
    pub gold_count: usize,
    /// (application, mean questions per annotated snippet)
    pub mean_questions_per_snippet: BTreeMap<String, f64>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate_dataset(
    docs: &BTreeMap<String, PaperDocument>,
    snippets: &[SnippetRecord],
    gold: &BTreeMap<String, GoldAnnotation>,
) -> ValidationReport {
    let mut findings = Vec::new();
    for snippet in snippets {
        match docs.get(&snippet.source_doc) {
            None => findings.push(Finding::DanglingSourceDoc {
                snippet_id: snippet.snippet_id.clone(),
                doc_id: snippet.source_doc.clone(),
            }),
            Some(doc) => match doc.paragraph(&snippet.context_para) {
                None => findings.push(Finding::MissingContextPara {
                    snippet_id: snippet.snippet_id.clone(),
                    para_id: snippet.context_para.clone(),
                }),
                Some(para) => {
                    let para_norm = normalize_for_containment(&para.text);
                    let snip_norm = normalize_for_containment(&snippet.text);
                    if !para_norm.contains(&snip_norm) {
                        findings.push(Finding::ContainmentFailure {
                            snippet_id: snippet.snippet_id.clone(),
                        });
                    }
                }
            },
        }
        for cited in &snippet.cited_docs {
            if !docs.contains_key(cited) {
                findings.push(Finding::DanglingCitedDoc {
                    snippet_id: snippet.snippet_id.clone(),
                    doc_id: cited.clone(),
                });
            }
        }
    }

    let snippet_ids: Vec<&str> = snippets.iter().map(|s| s.snippet_id.as_str()).collect();
    let mut question_count = 0usize;
    for (snippet_id, annotation) in gold {
        if !snippet_ids.contains(&snippet_id.as_str()) {
            findings.push(Finding::UnknownGoldSnippet {
                snippet_id: snippet_id.clone(),
            });
        }
        question_count += annotation.questions.len();
        for q in &annotation.questions {
            for ev in &q.evidence {
                let resolved = docs
                    .get(&ev.doc_id)
                    .map(|d| d.paragraph(&ev.para_id).is_some())
                    .unwrap_or(false);
                if !resolved {
                    findings.push(Finding::DanglingEvidence {
                        snippet_id: snippet_id.clone(),
                        doc_id: ev.doc_id.clone(),
                        para_id: ev.para_id.clone(),
                    });
                }
            }
        }
    }

    let mut mean_questions_per_snippet = BTreeMap::new();
    for (app, label) in [
        (Application::CitationGraphExplorer, "citation_graph_explorer"),
        (Application::ResearchAssistant, "research_assistant"),
    ] {
        let annotated: Vec<&SnippetRecord> = snippets
            .iter()
            .filter(|s| s.application == app && gold.contains_key(&s.snippet_id))
            .collect();
        if !annotated.is_empty() {
            let total: usize = annotated
                .iter()
                .map(|s| gold[&s.snippet_id].questions.len())
                .sum();
            mean_questions_per_snippet.insert(label.to_string(), total as f64 / annotated.len() as f64);
        }
    }

    ValidationReport {
        findings,
        snippet_count: snippets.len(),
        question_count,
        gold_count: gold.len(),
        mean_questions_per_snippet,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CondensationMode {
    Tsp,
    Tasp,
    Taisp,
    Full,
}

impl std::str::FromStr for CondensationMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsp" => Ok(CondensationMode::Tsp),
            "tasp" => Ok(CondensationMode::Tasp),
            "taisp" => Ok(CondensationMode::Taisp),
            "full" => Ok(CondensationMode::Full),
            other => Err(CorpusError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentContext {
    pub mode: CondensationMode,
    pub rendered: String,
    pub truncated: bool,
}

/// Paragraphs of the introduction section: the first section whose header
/// contains "introduction" (case-insensitive), else the leading run of
/// paragraphs sharing the first paragraph's section.
fn introduction_paragraphs(doc: &PaperDocument) -> Vec<&Paragraph> {
    let intro_section = doc.paragraphs.iter().find_map(|p| {
        p.section
            .as_ref()
            .filter(|s| s.to_lowercase().contains("introduction"))
            .cloned()
    });
    match intro_section {
        Some(section) => doc
            .paragraphs
            .iter()
            .filter(|p| p.section.as_deref() == Some(section.as_str()))
            .collect(),
        None => {
            let first = doc.paragraphs.first().map(|p| p.section.clone());
            match first {
                None => Vec::new(),
                Some(section) => doc
                    .paragraphs
                    .iter()
                    .take_while(|p| p.section == section)
                    .collect(),
            }
        }
    }
}

/// Renders a condensed document representation for prompting. Budgets are
/// counted in whitespace tokens; an over-budget rendering is truncated from
/// the end (which normalizes its whitespace).
pub fn condense_document(
    doc: &PaperDocument,
    snippet: &SnippetRecord,
    mode: CondensationMode,
    token_budget: usize,
) -> DocumentContext {
    assert!(token_budget > 0, "token_budget must be positive");
    let mut rendered = String::new();
    let _ = writeln!(rendered, "Title: {}", doc.title);
    match mode {
        CondensationMode::Tsp | CondensationMode::Tasp | CondensationMode::Taisp => {
            if mode != CondensationMode::Tsp {
                let _ = writeln!(rendered, "Abstract: {}", doc.abstract_text);
            }
            if mode == CondensationMode::Taisp {
                for para in introduction_paragraphs(doc) {
                    let _ = writeln!(rendered, "Introduction: {}", para.text);
                }
            }
            if let Some(section) = snippet
                .section
                .as_deref()
                .or_else(|| doc.paragraph(&snippet.context_para).and_then(|p| p.section.as_deref()))
            {
                let _ = writeln!(rendered, "Section: {section}");
            }
            if let Some(para) = doc.paragraph(&snippet.context_para) {
                let _ = writeln!(rendered, "Paragraph: {}", para.text);
            }
        }
        CondensationMode::Full => {
            let _ = writeln!(rendered, "Abstract: {}", doc.abstract_text);
            let mut last_section: Option<&str> = None;
            for para in &doc.paragraphs {
                if para.section.as_deref() != last_section {
                    if let Some(section) = para.section.as_deref() {
                        let _ = writeln!(rendered, "Section: {section}");
                    }
                    last_section = para.section.as_deref();
                }
                let _ = writeln!(rendered, "{}", para.text);
            }
        }
    }

    let tokens: Vec<&str> = rendered.split_whitespace().collect();
    if tokens.len() > token_budget {
        DocumentContext {
            mode,
            rendered: tokens[..token_budget].join(" "),
            truncated: true,
        }
    } else {
        DocumentContext {
            mode,
            rendered: rendered.trim_end().to_string(),
            truncated: false,
        }
    }
}
