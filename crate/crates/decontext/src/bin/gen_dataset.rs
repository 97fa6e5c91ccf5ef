//! Deterministic generator for the bundled synthetic corpus.
//!
//! Emits documents.jsonl, snippets.jsonl, and gold.jsonl into an output
//! directory. Everything is derived from fixed word pools indexed by record
//! position, so regeneration is byte-identical. The corpus is sized to match
//! the reference dataset's statistics: 289 snippets (170 citation-graph
//! explorer, 119 research assistant), 487 gold questions, and roughly 5% of
//! gold rewrites carrying deliberate bracket-format defects.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use decontext::corpus::{
    Application, EvidenceRef, GoldAnnotation, GoldQuestion, PaperDocument, Paragraph, QuestionType, SnippetRecord,
};

const METHODS: [&str; 30] = [
    "GraphLex", "SpanMix", "NeuroSort", "ClauseNet", "PathFinder", "TermWeave", "EdgeRank", "LexFuse", "TreeGate",
    "SegPool", "NodeCast", "FrameLink", "TagFlow", "CoreSpan", "DocMesh", "RelScope", "TypeAnchor", "SlotMiner",
    "ArcBlend", "ChainMark", "FactGrid", "HintProbe", "MaskTrace", "PivotSum", "QueryLoom", "RuleSketch",
    "StepAlign", "TokenForge", "UnitGraph", "ViewStack",
];

const TASKS: [&str; 10] = [
    "relation extraction",
    "coreference resolution",
    "citation intent classification",
    "claim verification",
    "entity linking",
    "abstractive summarization",
    "question decomposition",
    "table grounding",
    "argument mining",
    "evidence retrieval",
];

const DATASETS: [&str; 10] = [
    "WikiRel", "SciCite-XL", "OpenClaim", "BioLink", "NewsSum", "DecompQA", "TabFact-S", "ArgMine", "EviBench",
    "CorefBank",
];

const METRICS: [&str; 5] = ["macro F1", "exact match", "mean reciprocal rank", "ROUGE-L", "accuracy"];

const CITED: [&str; 20] = [
    "BERT-Rel", "SpanBERT-C", "CiteNet", "ClaimCheck", "LinkPro", "SumGen", "DecompNet", "TabGround", "ArgSpan",
    "EviRank", "CorefPro", "RelPrior", "SciBERT-T", "GraphPrior", "SeqTag", "DualEnc", "HierAtt", "MemNet-R",
    "CrossDoc", "AnchorNet",
];

const N_SOURCE_DOCS: usize = 30;
const N_SNIPPETS: usize = 289;
const N_CGE: usize = 170;
const SENTENCES_PER_DOC: usize = 10;

struct Topic {
    method: &'static str,
    task: &'static str,
    dataset: &'static str,
    metric: &'static str,
    cited_a: &'static str,
    cited_b: &'static str,
    cited_a_id: String,
    cited_b_id: String,
}

fn topic(doc_idx: usize) -> Topic {
    let a = doc_idx % CITED.len();
    let b = (doc_idx + 7) % CITED.len();
    Topic {
        method: METHODS[doc_idx],
        task: TASKS[doc_idx % TASKS.len()],
        dataset: DATASETS[(doc_idx + 3) % DATASETS.len()],
        metric: METRICS[doc_idx % METRICS.len()],
        cited_a: CITED[a],
        cited_b: CITED[b],
        cited_a_id: format!("cit{:02}", a + 1),
        cited_b_id: format!("cit{:02}", b + 1),
    }
}

/// The ten candidate snippet sentences of a source document, in order.
fn sentences(t: &Topic) -> [String; SENTENCES_PER_DOC] {
    [
        format!("Prior systems such as {} rely on surface features alone.", t.cited_a),
        format!("Their results suggest that richer structure helps in {}.", t.task),
        format!("We introduce {}, a model for {}.", t.method, t.task),
        format!("Our approach extends {} with a typed attention layer.", t.cited_b),
        "The encoder shares parameters across both stages.".to_string(),
        "We train it end to end with a margin objective.".to_string(),
        format!("We evaluate our model on the {} benchmark.", t.dataset),
        format!("Our system improves {} by a wide margin over {}.", t.metric, t.cited_a),
        "This gap narrows when gold spans are provided.".to_string(),
        "We leave multilingual transfer to future work.".to_string(),
    ]
}

fn source_doc(doc_idx: usize) -> PaperDocument {
    let t = topic(doc_idx);
    let s = sentences(&t);
    let para = |id: &str, section: &str, text: String| Paragraph {
        para_id: id.to_string(),
        section: Some(section.to_string()),
        text,
    };
    PaperDocument {
        doc_id: format!("src{:02}", doc_idx + 1),
        title: format!("{}: Structured Modeling for {}", t.method, capitalize(t.task)),
        abstract_text: format!(
            "We present {}, a structured model for {}. The model combines a shared encoder with typed attention \
             and is evaluated on the {} benchmark, where it improves {} over strong baselines.",
            t.method, t.task, t.dataset, t.metric
        ),
        paragraphs: vec![
            para(
                "p1",
                "Introduction",
                format!(
                    "Understanding {} requires context beyond a single sentence. This paper studies that problem.",
                    t.task
                ),
            ),
            para("p2", "Introduction", format!("{} {}", s[0], s[1])),
            para("p3", "Method", format!("{} {}", s[2], s[3])),
            para("p4", "Method", format!("{} {}", s[4], s[5])),
            para("p5", "Experiments", format!("{} {}", s[6], s[7])),
            para("p6", "Discussion", format!("{} {}", s[8], s[9])),
        ],
    }
}

fn cited_doc(cit_idx: usize) -> PaperDocument {
    let method = CITED[cit_idx];
    let task = TASKS[cit_idx % TASKS.len()];
    PaperDocument {
        doc_id: format!("cit{:02}", cit_idx + 1),
        title: format!("{}: A Baseline for {}", method, capitalize(task)),
        abstract_text: format!(
            "{} is a baseline system for {} built on pretrained representations and surface features.",
            method, task
        ),
        paragraphs: vec![
            Paragraph {
                para_id: "p1".to_string(),
                section: Some("Introduction".to_string()),
                text: format!("{} is a baseline system for {}.", method, task),
            },
            Paragraph {
                para_id: "p2".to_string(),
                section: Some("Method".to_string()),
                text: format!("{} scores candidate pairs with surface features and a linear layer.", method),
            },
            Paragraph {
                para_id: "p3".to_string(),
                section: Some("Results".to_string()),
                text: format!("{} reports competitive results on standard splits for {}.", method, task),
            },
        ],
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Maps a global snippet index to (doc index, sentence index).
fn place(snippet_idx: usize) -> (usize, usize) {
    (snippet_idx / SENTENCES_PER_DOC, snippet_idx % SENTENCES_PER_DOC)
}

fn context_para(sentence_idx: usize) -> &'static str {
    ["p2", "p2", "p3", "p3", "p4", "p4", "p5", "p5", "p6", "p6"][sentence_idx]
}

fn snippet(snippet_idx: usize) -> SnippetRecord {
    let (doc_idx, sent_idx) = place(snippet_idx);
    let t = topic(doc_idx);
    let s = sentences(&t);
    let application = if snippet_idx < N_CGE {
        Application::CitationGraphExplorer
    } else {
        Application::ResearchAssistant
    };
    SnippetRecord {
        snippet_id: format!("snip-{:04}", snippet_idx + 1),
        text: s[sent_idx].clone(),
        source_doc: format!("src{:02}", doc_idx + 1),
        context_para: context_para(sent_idx).to_string(),
        section: None,
        application,
        cited_docs: vec![t.cited_a_id.clone(), t.cited_b_id.clone()],
        user_query: match application {
            Application::ResearchAssistant => Some(format!("How does {} handle {}?", t.method, t.task)),
            Application::CitationGraphExplorer => None,
        },
    }
}

fn primary_question(doc_idx: usize, sent_idx: usize) -> GoldQuestion {
    let t = topic(doc_idx);
    let src = format!("src{:02}", doc_idx + 1);
    let ev = |doc: &str, para: &str| EvidenceRef {
        doc_id: doc.to_string(),
        para_id: para.to_string(),
    };
    match sent_idx {
        0 => GoldQuestion {
            question: format!("What is {}?", t.cited_a),
            qtype: QuestionType::Define,
            answer: format!("{} is a baseline system for {}.", t.cited_a, TASKS[(doc_idx % CITED.len()) % TASKS.len()]),
            evidence: vec![ev(&t.cited_a_id, "p1")],
        },
        1 => GoldQuestion {
            question: "Whose results are meant?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("The results of {}.", t.cited_a),
            evidence: vec![ev(&src, "p2")],
        },
        2 => GoldQuestion {
            question: format!("What is {}?", t.task),
            qtype: QuestionType::Define,
            answer: format!("{} is the task the paper addresses.", capitalize(t.task)),
            evidence: vec![ev(&src, "p1")],
        },
        3 => GoldQuestion {
            question: "What is the authors' approach?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("{}, a model for {}.", t.method, t.task),
            evidence: vec![ev(&src, "p3")],
        },
        4 => GoldQuestion {
            question: "Which encoder is meant?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("The shared encoder of {}.", t.method),
            evidence: vec![ev(&src, "p4")],
        },
        5 => GoldQuestion {
            question: "What does \"it\" refer to?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("The {} model.", t.method),
            evidence: vec![ev(&src, "p3")],
        },
        6 => GoldQuestion {
            question: format!("What is the {} benchmark?", t.dataset),
            qtype: QuestionType::Define,
            answer: format!("{} is a benchmark for {}.", t.dataset, t.task),
            evidence: vec![ev(&src, "p5")],
        },
        7 => GoldQuestion {
            question: "Which system is meant?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("{}.", t.method),
            evidence: vec![ev(&src, "p3")],
        },
        8 => GoldQuestion {
            question: "Which gap is meant?".to_string(),
            qtype: QuestionType::MoreContext,
            answer: format!("The gap in {} between {} and {}.", t.metric, t.method, t.cited_a),
            evidence: vec![ev(&src, "p5")],
        },
        _ => GoldQuestion {
            question: "Who does \"we\" refer to?".to_string(),
            qtype: QuestionType::Coref,
            answer: format!("The authors of {}.", t.method),
            evidence: vec![ev(&src, "p3")],
        },
    }
}

fn secondary_question(doc_idx: usize) -> GoldQuestion {
    let t = topic(doc_idx);
    GoldQuestion {
        question: "What task does the paper study?".to_string(),
        qtype: QuestionType::MoreContext,
        answer: format!("{}.", capitalize(t.task)),
        evidence: vec![EvidenceRef {
            doc_id: format!("src{:02}", doc_idx + 1),
            para_id: "p1".to_string(),
        }],
    }
}

/// Two questions for the first 156 citation-graph snippets and the first 42
/// research-assistant snippets; one question for the rest. Totals: 326 + 161.
fn question_count(snippet_idx: usize) -> usize {
    if snippet_idx < N_CGE {
        if snippet_idx < 156 { 2 } else { 1 }
    } else if snippet_idx < N_CGE + 42 {
        2
    } else {
        1
    }
}

/// Every 21st snippet starting at index 5 gets a defective rewrite: even
/// occurrences leave a bracket unbalanced, odd ones append unbracketed text.
fn format_error_kind(snippet_idx: usize) -> Option<usize> {
    if snippet_idx % 21 == 5 {
        Some((snippet_idx / 21) % 2)
    } else {
        None
    }
}

fn gold_rewrite(snippet_idx: usize) -> String {
    let (doc_idx, sent_idx) = place(snippet_idx);
    let t = topic(doc_idx);
    let text = sentences(&t)[sent_idx].clone();

    let clarification = match sent_idx {
        0 => format!("a baseline for {}", t.task),
        1 => format!("the results of {}", t.cited_a),
        2 => "a typed attention model".to_string(),
        3 => format!("the {} baseline", t.cited_b),
        4 => format!("the shared encoder of {}", t.method),
        5 => format!("the {} model", t.method),
        6 => format!("a benchmark for {}", t.task),
        7 => format!("the {} system", t.method),
        8 => format!("the {} gap between {} and {}", t.metric, t.method, t.cited_a),
        _ => format!("the authors of {}", t.method),
    };

    let mut rewrite = if let Some(rest) = text.strip_prefix("We ") {
        format!("[REF0] {rest}")
    } else if let Some(rest) = text.strip_prefix("Our ") {
        format!("[REF0's] {rest}")
    } else if let Some(rest) = text.strip_prefix("Their ") {
        format!("[{}'s] {rest}", t.cited_a)
    } else {
        text
    };
    if let Some(stripped) = rewrite.strip_suffix('.') {
        rewrite = format!("{stripped} [{clarification}].");
    }

    match format_error_kind(snippet_idx) {
        Some(0) => format!("{rewrite} [as reported in"),
        Some(_) => format!("{rewrite} consistent alongside earlier unpublished findings."),
        None => rewrite,
    }
}

fn gold(snippet_idx: usize) -> GoldAnnotation {
    let (doc_idx, sent_idx) = place(snippet_idx);
    let mut questions = vec![primary_question(doc_idx, sent_idx)];
    if question_count(snippet_idx) == 2 {
        questions.push(secondary_question(doc_idx));
    }
    GoldAnnotation {
        snippet_id: format!("snip-{:04}", snippet_idx + 1),
        rewrite: gold_rewrite(snippet_idx),
        questions,
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn main() -> std::io::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&out_dir)?;

    let docs = (0..N_SOURCE_DOCS)
        .map(source_doc)
        .chain((0..CITED.len()).map(cited_doc));
    write_jsonl(&out_dir.join("documents.jsonl"), docs)?;
    write_jsonl(&out_dir.join("snippets.jsonl"), (0..N_SNIPPETS).map(snippet))?;
    write_jsonl(&out_dir.join("gold.jsonl"), (0..N_SNIPPETS).map(gold))?;
    // Small slice for the example mock configuration.
    write_jsonl(&out_dir.join("demo_snippets.jsonl"), (0..3).map(snippet))?;

    let questions: usize = (0..N_SNIPPETS).map(question_count).sum();
    let defects = (0..N_SNIPPETS).filter(|i| format_error_kind(*i).is_some()).count();
    println!(
        "wrote {} documents, {} snippets, {} gold annotations ({} questions, {} defective rewrites) to {}",
        N_SOURCE_DOCS + CITED.len(),
        N_SNIPPETS,
        N_SNIPPETS,
        questions,
        defects,
        out_dir.display()
    );
    Ok(())
}
