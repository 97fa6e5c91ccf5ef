//! Three-stage decontextualization and the end-to-end baseline.
//!
//! The chained strategy runs question generation, question answering (per
//! question), and rewriting, making exactly `n + 2` backend calls for `n`
//! generated questions. Any stage can be overridden with gold annotations,
//! which is how the oracle/ablation grid is realized: gold questions skip the
//! QG call, gold answers skip all QA calls (one rewrite call remains).
//!
//! Per-record failures are captured in the result record instead of aborting
//! the corpus run; with a warm cache a re-run is free.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{condense_document, CondensationMode, DocumentContext, EvidenceRef, GoldAnnotation, PaperDocument, SnippetRecord};
use crate::edits::{check_transparency, TransparencyReport};
use crate::llm::{Bindings, CompletionRequest, LlmClient, LlmError, Prompt, PromptTemplate, TemplateError};
use crate::metrics::{evaluate_run, EvalReport, ScoredPrediction};
use crate::retrieval::{retrieve_top_k, Bm25Params, PassageIndex, RetrievalError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("document {0:?} is not loaded")]
    MissingDocument(String),
    #[error("paragraph {para_id:?} not found in document {doc_id:?}")]
    MissingParagraph { doc_id: String, para_id: String },
    #[error("gold {what} unavailable for snippet {snippet_id:?}")]
    MissingGold { what: String, snippet_id: String },
    #[error("invalid stage combination: {0}")]
    InvalidStages(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    Generated,
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Retrieve,
    FullDoc,
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Generated,
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Qadecontext,
    EndToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EndToEndStyle {
    /// System/user chat prompt carrying the full document text.
    Chat,
    /// Single prompt carrying the condensed document representation.
    #[default]
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaPairAnswerSource {
    GeneratedRetrieve,
    GeneratedFulldoc,
    Gold,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QAPair {
    pub question: String,
    /// `None` means the model abstained ("No answer.").
    pub answer: Option<String>,
    pub evidence: Vec<EvidenceRef>,
    pub question_source: QuestionSource,
    pub answer_source: QaPairAnswerSource,
}

/// Which of (D)ocument, (Q)uestions, (A)nswers, (E)vidence reach the rewriter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteInputConfig {
    pub include_document: bool,
    pub include_questions: bool,
    pub include_answers: bool,
    pub include_evidence: bool,
}

impl RewriteInputConfig {
    pub fn parse(spec: &str) -> Result<RewriteInputConfig, PipelineError> {
        let mut config = RewriteInputConfig {
            include_document: false,
            include_questions: false,
            include_answers: false,
            include_evidence: false,
        };
        for ch in spec.chars() {
            match ch.to_ascii_uppercase() {
                'D' => config.include_document = true,
                'Q' => config.include_questions = true,
                'A' => config.include_answers = true,
                'E' => config.include_evidence = true,
                other => {
                    return Err(PipelineError::InvalidStages(format!(
                        "unknown rewrite-input flag {other:?} in {spec:?}"
                    )))
                }
            }
        }
        if config.include_answers && !config.include_questions {
            return Err(PipelineError::InvalidStages(format!(
                "{spec:?}: answers are never presented without their questions"
            )));
        }
        Ok(config)
    }

    pub fn label(&self) -> String {
        let mut label = String::new();
        if self.include_document {
            label.push('D');
        }
        if self.include_questions {
            label.push('Q');
        }
        if self.include_answers {
            label.push('A');
        }
        if self.include_evidence {
            label.push('E');
        }
        label
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub prompt: Prompt,
    pub completion: String,
    pub cached: bool,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecontextResult {
    pub snippet_id: String,
    pub source: String,
    pub mode: RunMode,
    pub qa_pairs: Vec<QAPair>,
    pub rewrite_raw: String,
    pub validation: Option<TransparencyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<StageTrace>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSettings {
    pub mode: RunMode,
    pub question_source: QuestionSource,
    pub evidence_source: EvidenceSource,
    pub answer_source: AnswerSource,
    pub rewrite_inputs: RewriteInputConfig,
    pub condensation: CondensationMode,
    pub token_budget: usize,
    pub question_cap: usize,
    pub k: usize,
    pub k1: f64,
    pub b: f64,
    pub tolerance: usize,
    pub max_output_tokens: u32,
    pub end_to_end_style: EndToEndStyle,
    pub backend_id: String,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            mode: RunMode::Qadecontext,
            question_source: QuestionSource::Generated,
            evidence_source: EvidenceSource::Retrieve,
            answer_source: AnswerSource::Generated,
            rewrite_inputs: RewriteInputConfig::parse("DQAE").unwrap(),
            condensation: CondensationMode::Tasp,
            token_budget: 3000,
            question_cap: 3,
            k: crate::retrieval::DEFAULT_K,
            k1: crate::retrieval::DEFAULT_K1,
            b: crate::retrieval::DEFAULT_B,
            tolerance: crate::edits::DEFAULT_TOLERANCE,
            max_output_tokens: 512,
            end_to_end_style: EndToEndStyle::Single,
            backend_id: "default".to_string(),
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.question_source == QuestionSource::Generated {
            if self.answer_source == AnswerSource::Gold {
                return Err(PipelineError::InvalidStages(
                    "gold answers require gold questions".to_string(),
                ));
            }
            if self.evidence_source == EvidenceSource::Gold {
                return Err(PipelineError::InvalidStages(
                    "gold evidence requires gold questions".to_string(),
                ));
            }
        }
        Ok(())
    }
}

pub struct TemplateSet {
    pub question_gen: PromptTemplate,
    pub question_answer: PromptTemplate,
    pub rewrite: PromptTemplate,
    pub end_to_end_system: PromptTemplate,
    pub end_to_end_user: PromptTemplate,
    pub end_to_end_single: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        use crate::llm::templates;
        TemplateSet {
            question_gen: PromptTemplate::parse("question_gen", templates::QUESTION_GEN).unwrap(),
            question_answer: PromptTemplate::parse("question_answer", templates::QUESTION_ANSWER).unwrap(),
            rewrite: PromptTemplate::parse("rewrite", templates::REWRITE).unwrap(),
            end_to_end_system: PromptTemplate::parse("end_to_end_system", templates::END_TO_END_SYSTEM).unwrap(),
            end_to_end_user: PromptTemplate::parse("end_to_end_user", templates::END_TO_END_USER).unwrap(),
            end_to_end_single: PromptTemplate::parse("end_to_end_single", templates::END_TO_END_SINGLE).unwrap(),
        }
    }

    pub fn from_dir(dir: &std::path::Path) -> std::io::Result<TemplateSet> {
        let read = |file: &str| std::fs::read_to_string(dir.join(file));
        let parse = |name: &str, body: String| {
            PromptTemplate::parse(name, &body)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
        };
        Ok(TemplateSet {
            question_gen: parse("question_gen", read("question_gen.txt")?)?,
            question_answer: parse("question_answer", read("question_answer.txt")?)?,
            rewrite: parse("rewrite", read("rewrite.txt")?)?,
            end_to_end_system: parse("end_to_end_system", read("end_to_end_system.txt")?)?,
            end_to_end_user: parse("end_to_end_user", read("end_to_end_user.txt")?)?,
            end_to_end_single: parse("end_to_end_single", read("end_to_end_single.txt")?)?,
        })
    }
}

/// Bullet lines become questions; a "No questions" line clears the list;
/// everything else is ignored.
pub fn parse_question_list(raw: &str) -> Vec<String> {
    let mut questions = Vec::new();
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let normalized = trimmed
            .trim_end_matches(|c: char| c.is_ascii_punctuation())
            .to_lowercase();
        if normalized == "no questions" {
            questions.clear();
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('-') {
            let question = rest.trim();
            if !question.is_empty() {
                questions.push(question.to_string());
            }
        }
    }
    questions
}

fn is_abstention(completion: &str) -> bool {
    completion
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .eq_ignore_ascii_case("no answer")
}

fn evidence_line(text: &str) -> String {
    format!("Paragraph with potentially helpful information: \"{text}\"")
}

/// Deterministic binding map for the rewriting prompt. Components excluded
/// by the config are simply not bound, so their template blocks vanish.
/// Abstained answers render as the literal "No answer.".
pub fn assemble_rewrite_bindings(
    snippet: &SnippetRecord,
    config: RewriteInputConfig,
    qa_pairs: &[QAPair],
    document: Option<(&PaperDocument, &str, Option<&str>)>,
    evidence_texts: &[String],
) -> Bindings {
    let mut bindings = Bindings::new();
    bindings.insert("snippet".to_string(), snippet.text.clone());
    if config.include_document {
        if let Some((doc, context_paragraph, section_header)) = document {
            bindings.insert("document".to_string(), "included".to_string());
            bindings.insert("title".to_string(), doc.title.clone());
            bindings.insert("abstract".to_string(), doc.abstract_text.clone());
            bindings.insert(
                "section_header".to_string(),
                section_header.unwrap_or_default().to_string(),
            );
            bindings.insert("context_paragraph".to_string(), context_paragraph.to_string());
        }
    }
    if config.include_questions {
        let questions = qa_pairs
            .iter()
            .map(|qa| format!("Question: {}", qa.question))
            .collect::<Vec<_>>()
            .join("\n");
        bindings.insert("questions".to_string(), questions);
    }
    if config.include_answers {
        let pairs = qa_pairs
            .iter()
            .map(|qa| {
                format!(
                    "Question: {}\nAnswer: {}",
                    qa.question,
                    qa.answer.as_deref().unwrap_or("No answer.")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        bindings.insert("qa_pairs".to_string(), pairs);
    }
    if config.include_evidence {
        let evidence = evidence_texts
            .iter()
            .map(|t| evidence_line(t))
            .collect::<Vec<_>>()
            .join("\n");
        bindings.insert("evidence".to_string(), evidence);
    }
    bindings
}

pub struct Pipeline<'a> {
    pub docs: &'a BTreeMap<String, PaperDocument>,
    pub gold: &'a BTreeMap<String, GoldAnnotation>,
    pub client: &'a LlmClient<'a>,
    pub templates: &'a TemplateSet,
    pub settings: RunSettings,
}

impl<'a> Pipeline<'a> {
    fn complete_stage(
        &self,
        stage: &str,
        prompt: Prompt,
        trace: &mut Vec<StageTrace>,
    ) -> Result<String, PipelineError> {
        let mut request = CompletionRequest::new(self.settings.backend_id.clone(), prompt.clone());
        request.max_output_tokens = self.settings.max_output_tokens;
        let result = self.client.complete(&request)?;
        trace.push(StageTrace {
            stage: stage.to_string(),
            prompt,
            completion: result.text.clone(),
            cached: result.cached,
            duration_ms: result.latency.as_millis() as u64,
            warnings: Vec::new(),
        });
        Ok(result.text)
    }

    fn source_doc(&self, snippet: &SnippetRecord) -> Result<&'a PaperDocument, PipelineError> {
        self.docs
            .get(&snippet.source_doc)
            .ok_or_else(|| PipelineError::MissingDocument(snippet.source_doc.clone()))
    }

    fn context(&self, snippet: &SnippetRecord, mode: CondensationMode) -> Result<DocumentContext, PipelineError> {
        let doc = self.source_doc(snippet)?;
        Ok(condense_document(doc, snippet, mode, self.settings.token_budget))
    }

    fn section_header<'b>(&self, snippet: &'b SnippetRecord, doc: &'b PaperDocument) -> Option<&'b str> {
        snippet
            .section
            .as_deref()
            .or_else(|| doc.paragraph(&snippet.context_para).and_then(|p| p.section.as_deref()))
    }

    pub fn generate_questions(
        &self,
        snippet: &SnippetRecord,
        trace: &mut Vec<StageTrace>,
    ) -> Result<Vec<String>, PipelineError> {
        let mut bindings = Bindings::new();
        bindings.insert("snippet".to_string(), snippet.text.clone());
        let prompt = self.templates.question_gen.render(&bindings)?;
        let completion = self.complete_stage("question_generation", Prompt::single(prompt), trace)?;
        let mut questions = parse_question_list(&completion);
        if questions.is_empty() && !completion.trim().is_empty() {
            let normalized = completion
                .trim()
                .trim_end_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase();
            if normalized != "no questions" {
                if let Some(entry) = trace.last_mut() {
                    entry.warnings.push("question list did not parse".to_string());
                }
            }
        }
        questions.truncate(self.settings.question_cap);
        Ok(questions)
    }

    /// Index over the union of the source document and the cited documents.
    pub fn build_record_index(&self, snippet: &SnippetRecord) -> Result<PassageIndex, PipelineError> {
        let mut docs: Vec<&PaperDocument> = Vec::new();
        docs.push(self.source_doc(snippet)?);
        for cited in &snippet.cited_docs {
            if let Some(doc) = self.docs.get(cited) {
                docs.push(doc);
            }
        }
        Ok(PassageIndex::build(docs)?)
    }

    fn evidence_for_question(
        &self,
        snippet: &SnippetRecord,
        question: &str,
        index: Option<&PassageIndex>,
        trace: &mut Vec<StageTrace>,
    ) -> Result<(Vec<EvidenceRef>, Vec<String>), PipelineError> {
        match self.settings.evidence_source {
            EvidenceSource::Retrieve => {
                let index = index.expect("retrieve mode builds an index");
                let params = Bm25Params { k1: self.settings.k1, b: self.settings.b };
                let ranked = retrieve_top_k(index, question, self.settings.k, params);
                if ranked.is_empty() {
                    if let Some(entry) = trace.last_mut() {
                        entry.warnings.push(format!("no passages retrieved for {question:?}"));
                    }
                }
                let mut refs = Vec::new();
                let mut texts = Vec::new();
                for r in ranked {
                    if let Some(text) = self
                        .docs
                        .get(&r.doc_id)
                        .and_then(|d| d.paragraph(&r.para_id))
                        .map(|p| p.text.clone())
                    {
                        refs.push(EvidenceRef { doc_id: r.doc_id, para_id: r.para_id });
                        texts.push(text);
                    }
                }
                Ok((refs, texts))
            }
            EvidenceSource::FullDoc => {
                let context = self.context(snippet, self.settings.condensation)?;
                Ok((Vec::new(), vec![context.rendered]))
            }
            EvidenceSource::Gold => unreachable!("gold evidence is resolved from the annotation"),
        }
    }

    fn gold_evidence(&self, gold_question: &crate::corpus::GoldQuestion) -> (Vec<EvidenceRef>, Vec<String>) {
        let mut refs = Vec::new();
        let mut texts = Vec::new();
        for ev in &gold_question.evidence {
            if let Some(text) = self
                .docs
                .get(&ev.doc_id)
                .and_then(|d| d.paragraph(&ev.para_id))
                .map(|p| p.text.clone())
            {
                refs.push(ev.clone());
                texts.push(text);
            }
        }
        (refs, texts)
    }

    pub fn answer_question(
        &self,
        snippet: &SnippetRecord,
        question: &str,
        question_source: QuestionSource,
        evidence_refs: Vec<EvidenceRef>,
        evidence_texts: &[String],
        trace: &mut Vec<StageTrace>,
    ) -> Result<QAPair, PipelineError> {
        let doc = self.source_doc(snippet)?;
        let context_paragraph = doc
            .paragraph(&snippet.context_para)
            .map(|p| p.text.clone())
            .unwrap_or_default();
        let mut bindings = Bindings::new();
        bindings.insert("title".to_string(), doc.title.clone());
        bindings.insert("abstract".to_string(), doc.abstract_text.clone());
        bindings.insert(
            "evidence".to_string(),
            evidence_texts.iter().map(|t| evidence_line(t)).collect::<Vec<_>>().join("\n"),
        );
        bindings.insert(
            "section_header".to_string(),
            self.section_header(snippet, doc).unwrap_or_default().to_string(),
        );
        bindings.insert("context_paragraph".to_string(), context_paragraph);
        bindings.insert("snippet".to_string(), snippet.text.clone());
        bindings.insert("question".to_string(), question.to_string());
        let prompt = self.templates.question_answer.render(&bindings)?;
        let completion = self.complete_stage("question_answering", Prompt::single(prompt), trace)?;
        let answer = if is_abstention(&completion) {
            None
        } else {
            Some(completion.trim().to_string())
        };
        Ok(QAPair {
            question: question.to_string(),
            answer,
            evidence: evidence_refs,
            question_source,
            answer_source: match self.settings.evidence_source {
                EvidenceSource::FullDoc => QaPairAnswerSource::GeneratedFulldoc,
                _ => QaPairAnswerSource::GeneratedRetrieve,
            },
        })
    }

    pub fn rewrite(&self, bindings: &Bindings, trace: &mut Vec<StageTrace>) -> Result<String, PipelineError> {
        let prompt = self.templates.rewrite.render(bindings)?;
        self.complete_stage("rewriting", Prompt::single(prompt), trace)
    }

    fn run_end_to_end(&self, snippet: &SnippetRecord, trace: &mut Vec<StageTrace>) -> Result<String, PipelineError> {
        match self.settings.end_to_end_style {
            EndToEndStyle::Chat => {
                let context = self.context(snippet, CondensationMode::Full)?;
                let system = self.templates.end_to_end_system.render(&Bindings::new())?;
                let mut bindings = Bindings::new();
                bindings.insert("full_text".to_string(), context.rendered);
                bindings.insert("snippet".to_string(), snippet.text.clone());
                let user = self.templates.end_to_end_user.render(&bindings)?;
                self.complete_stage("end_to_end", Prompt::Chat { system, user }, trace)
            }
            EndToEndStyle::Single => {
                let doc = self.source_doc(snippet)?;
                let mut bindings = Bindings::new();
                bindings.insert("title".to_string(), doc.title.clone());
                bindings.insert("abstract".to_string(), doc.abstract_text.clone());
                bindings.insert(
                    "section_header".to_string(),
                    self.section_header(snippet, doc).unwrap_or_default().to_string(),
                );
                bindings.insert(
                    "context_paragraph".to_string(),
                    doc.paragraph(&snippet.context_para).map(|p| p.text.clone()).unwrap_or_default(),
                );
                bindings.insert("snippet".to_string(), snippet.text.clone());
                let prompt = self.templates.end_to_end_single.render(&bindings)?;
                self.complete_stage("end_to_end", Prompt::single(prompt), trace)
            }
        }
    }

    fn run_qadecontext(
        &self,
        snippet: &SnippetRecord,
        trace: &mut Vec<StageTrace>,
    ) -> Result<(Vec<QAPair>, String), PipelineError> {
        let gold = self.gold.get(&snippet.snippet_id);

        // Stage 1: questions.
        let mut qa_pairs: Vec<QAPair> = Vec::new();
        let questions: Vec<String> = match self.settings.question_source {
            QuestionSource::Gold => {
                let gold = gold.ok_or_else(|| PipelineError::MissingGold {
                    what: "questions".to_string(),
                    snippet_id: snippet.snippet_id.clone(),
                })?;
                gold.questions.iter().map(|q| q.question.clone()).collect()
            }
            QuestionSource::Generated => self.generate_questions(snippet, trace)?,
        };

        // Stage 2: answers (plus evidence).
        let mut evidence_texts: Vec<String> = Vec::new();
        match self.settings.answer_source {
            AnswerSource::Gold => {
                let gold = gold.ok_or_else(|| PipelineError::MissingGold {
                    what: "answers".to_string(),
                    snippet_id: snippet.snippet_id.clone(),
                })?;
                for gq in &gold.questions {
                    let (refs, texts) = self.gold_evidence(gq);
                    evidence_texts.extend(texts);
                    qa_pairs.push(QAPair {
                        question: gq.question.clone(),
                        answer: Some(gq.answer.clone()),
                        evidence: refs,
                        question_source: QuestionSource::Gold,
                        answer_source: QaPairAnswerSource::Gold,
                    });
                }
            }
            AnswerSource::Generated => {
                let index = if self.settings.evidence_source == EvidenceSource::Retrieve && !questions.is_empty() {
                    Some(self.build_record_index(snippet)?)
                } else {
                    None
                };
                for question in &questions {
                    let (refs, texts) = match self.settings.evidence_source {
                        EvidenceSource::Gold => {
                            let gold = gold.ok_or_else(|| PipelineError::MissingGold {
                                what: "evidence".to_string(),
                                snippet_id: snippet.snippet_id.clone(),
                            })?;
                            let gq = gold
                                .questions
                                .iter()
                                .find(|gq| gq.question == *question)
                                .ok_or_else(|| PipelineError::MissingGold {
                                    what: "evidence".to_string(),
                                    snippet_id: snippet.snippet_id.clone(),
                                })?;
                            self.gold_evidence(gq)
                        }
                        _ => self.evidence_for_question(snippet, question, index.as_ref(), trace)?,
                    };
                    let qa = self.answer_question(
                        snippet,
                        question,
                        self.settings.question_source,
                        refs,
                        &texts,
                        trace,
                    )?;
                    evidence_texts.extend(texts);
                    qa_pairs.push(qa);
                }
            }
        }

        // Stage 3: rewrite.
        let doc = self.source_doc(snippet)?;
        let context_paragraph = doc
            .paragraph(&snippet.context_para)
            .map(|p| p.text.clone())
            .unwrap_or_default();
        let bindings = assemble_rewrite_bindings(
            snippet,
            self.settings.rewrite_inputs,
            &qa_pairs,
            Some((doc, &context_paragraph, self.section_header(snippet, doc))),
            &evidence_texts,
        );
        let rewrite_raw = self.rewrite(&bindings, trace)?;
        Ok((qa_pairs, rewrite_raw))
    }

    /// Runs one snippet end to end. Failures are captured in the result so
    /// corpus runs always complete.
    pub fn run_record(&self, snippet: &SnippetRecord) -> DecontextResult {
        let mut trace = Vec::new();
        let outcome = match self.settings.mode {
            RunMode::EndToEnd => self.run_end_to_end(snippet, &mut trace).map(|r| (Vec::new(), r)),
            RunMode::Qadecontext => self.run_qadecontext(snippet, &mut trace),
        };
        match outcome {
            Ok((qa_pairs, rewrite_raw)) => {
                let validation = check_transparency(&snippet.text, &rewrite_raw, self.settings.tolerance);
                DecontextResult {
                    snippet_id: snippet.snippet_id.clone(),
                    source: snippet.text.clone(),
                    mode: self.settings.mode,
                    qa_pairs,
                    rewrite_raw,
                    validation: Some(validation),
                    error: None,
                    trace,
                }
            }
            Err(err) => DecontextResult {
                snippet_id: snippet.snippet_id.clone(),
                source: snippet.text.clone(),
                mode: self.settings.mode,
                qa_pairs: Vec::new(),
                rewrite_raw: String::new(),
                validation: None,
                error: Some(err.to_string()),
                trace,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridCell {
    pub question_source: QuestionSource,
    pub evidence_source: EvidenceSource,
    pub answer_source: AnswerSource,
    pub rewrite_inputs: String,
}

impl GridCell {
    pub fn label(&self) -> String {
        let q = match self.question_source {
            QuestionSource::Gold => "goldQ",
            QuestionSource::Generated => "genQ",
        };
        let e = match self.evidence_source {
            EvidenceSource::Gold => "goldE",
            EvidenceSource::Retrieve => "retrieve",
            EvidenceSource::FullDoc => "fulldoc",
        };
        let a = match self.answer_source {
            AnswerSource::Gold => "goldA",
            AnswerSource::Generated => "genA",
        };
        format!("{q}/{e}/{a}/{}", self.rewrite_inputs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum AblationOutcome {
    Ok { report: EvalReport },
    Unavailable { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: GridCell,
    pub label: String,
    #[serde(flatten)]
    pub outcome: AblationOutcome,
}

/// One evaluated run per grid cell. Cells that need gold data that is not
/// loaded are marked unavailable instead of failing the whole table.
pub fn run_ablation(
    docs: &BTreeMap<String, PaperDocument>,
    snippets: &[SnippetRecord],
    gold: &BTreeMap<String, GoldAnnotation>,
    client: &LlmClient,
    templates: &TemplateSet,
    base: &RunSettings,
    grid: &[GridCell],
) -> Result<Vec<AblationRow>, PipelineError> {
    let mut rows = Vec::new();
    for cell in grid {
        let mut settings = base.clone();
        settings.mode = RunMode::Qadecontext;
        settings.question_source = cell.question_source;
        settings.evidence_source = cell.evidence_source;
        settings.answer_source = cell.answer_source;
        settings.rewrite_inputs = RewriteInputConfig::parse(&cell.rewrite_inputs)?;
        settings.validate()?;

        let needs_gold = cell.question_source == QuestionSource::Gold
            || cell.answer_source == AnswerSource::Gold
            || cell.evidence_source == EvidenceSource::Gold;
        if needs_gold && gold.is_empty() {
            rows.push(AblationRow {
                cell: cell.clone(),
                label: cell.label(),
                outcome: AblationOutcome::Unavailable {
                    reason: "gold annotations not loaded".to_string(),
                },
            });
            continue;
        }

        let pipeline = Pipeline {
            docs,
            gold,
            client,
            templates,
            settings,
        };
        let results: Vec<DecontextResult> = snippets.iter().map(|s| pipeline.run_record(s)).collect();
        let report = evaluate_run(
            results.iter().map(|r| ScoredPrediction {
                snippet_id: &r.snippet_id,
                source: &r.source,
                rewrite_raw: &r.rewrite_raw,
                transparency_failed: r.validation.as_ref().map(|v| !v.passes).unwrap_or(true),
            }),
            gold,
        );
        rows.push(AblationRow {
            cell: cell.clone(),
            label: cell.label(),
            outcome: AblationOutcome::Ok { report },
        });
    }
    Ok(rows)
}

/// The eleven oracle rewrite-input configurations, gold question/answer/
/// evidence sources throughout.
pub fn oracle_grid() -> Vec<GridCell> {
    ["D", "DQ", "DQA", "E", "QE", "QAE", "DE", "DQE", "DQAE", "Q", "QA"]
        .iter()
        .map(|inputs| GridCell {
            question_source: QuestionSource::Gold,
            evidence_source: EvidenceSource::Gold,
            answer_source: AnswerSource::Gold,
            rewrite_inputs: inputs.to_string(),
        })
        .collect()
}
