//! Implementations behind the CLI subcommands.
//!
//! Each command takes a loaded [`RunConfig`] plus any subcommand arguments,
//! does its work, and returns a process exit code. Output files are written
//! deterministically (input order for results, sorted keys elsewhere) so a
//! warm-cache re-run produces byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::corpus::{self, GoldAnnotation, PaperDocument, SnippetRecord};
use crate::edits::check_transparency;
use crate::llm::{CompletionCache, LlmClient};
use crate::metrics::{evaluate_run, EvalReport, ScoredPrediction};
use crate::pipeline::{run_ablation, AblationOutcome, AblationRow, DecontextResult, GridCell, Pipeline, TemplateSet};

pub struct LoadedCorpus {
    pub docs: BTreeMap<String, PaperDocument>,
    pub snippets: Vec<SnippetRecord>,
    pub gold: BTreeMap<String, GoldAnnotation>,
}

pub fn load_corpus(config: &RunConfig) -> Result<LoadedCorpus> {
    let documents = config
        .corpus
        .documents
        .as_ref()
        .context("config is missing corpus.documents")?;
    let snippets_path = config
        .corpus
        .snippets
        .as_ref()
        .context("config is missing corpus.snippets")?;
    let docs = corpus::load_documents(documents)?;
    let snippets = corpus::load_snippets(snippets_path)?;
    let gold = match &config.corpus.gold {
        Some(path) => corpus::load_gold(path)?,
        None => BTreeMap::new(),
    };
    Ok(LoadedCorpus { docs, snippets, gold })
}

pub fn cmd_validate(config: &RunConfig) -> Result<i32> {
    let corpus = load_corpus(config)?;
    let report = corpus::validate_dataset(&corpus.docs, &corpus.snippets, &corpus.gold);
    println!("documents: {}", corpus.docs.len());
    println!("snippets: {}", report.snippet_count);
    println!("gold annotations: {}", report.gold_count);
    println!("gold questions: {}", report.question_count);
    for (app, mean) in &report.mean_questions_per_snippet {
        println!("mean questions per snippet ({app}): {mean:.3}");
    }
    if report.is_clean() {
        println!("validation: clean");
        Ok(0)
    } else {
        println!("validation: {} finding(s)", report.findings.len());
        for finding in &report.findings {
            println!("  {finding:?}");
        }
        Ok(1)
    }
}

fn open_cache(config: &RunConfig) -> Result<Option<CompletionCache>> {
    match &config.output.cache_dir {
        Some(dir) => Ok(Some(CompletionCache::open(dir.clone())?)),
        None => Ok(None),
    }
}

fn load_templates(config: &RunConfig) -> Result<TemplateSet> {
    match &config.output.template_dir {
        Some(dir) => TemplateSet::from_dir(dir).with_context(|| format!("loading templates from {}", dir.display())),
        None => Ok(TemplateSet::builtin()),
    }
}

/// Runs every snippet through the pipeline with a bounded worker pool.
/// Results come back in input order regardless of which thread finished
/// first.
pub fn run_all(pipeline: &Pipeline, snippets: &[SnippetRecord], concurrency: usize) -> Vec<DecontextResult> {
    let workers = concurrency.max(1).min(snippets.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<DecontextResult>>> = snippets.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= snippets.len() {
                    break;
                }
                let result = pipeline.run_record(&snippets[idx]);
                *slots[idx].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

fn write_results(out_dir: &Path, results: &[DecontextResult]) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let results_path = out_dir.join("results.jsonl");
    let mut file = fs::File::create(&results_path)?;
    for result in results {
        writeln!(file, "{}", serde_json::to_string(result)?)?;
        let trace_path = traces_dir.join(format!("{}.json", result.snippet_id));
        fs::write(&trace_path, serde_json::to_vec_pretty(&result.trace)?)?;
    }
    Ok(results_path)
}

pub fn cmd_run(config: &RunConfig) -> Result<i32> {
    let corpus = load_corpus(config)?;
    let settings = config.settings()?;
    let backend = config.build_backend()?;
    let cache = open_cache(config)?;
    let mut client = LlmClient::new(backend.as_ref()).with_retry(config.retry_policy());
    if let Some(cache) = &cache {
        client = client.with_cache(cache);
    }
    let templates = load_templates(config)?;
    let pipeline = Pipeline {
        docs: &corpus.docs,
        gold: &corpus.gold,
        client: &client,
        templates: &templates,
        settings,
    };
    let results = run_all(&pipeline, &corpus.snippets, config.backend.concurrency);

    let out_dir = config
        .output
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    let results_path = write_results(&out_dir, &results)?;

    let errors = results.iter().filter(|r| r.error.is_some()).count();
    let failed = results
        .iter()
        .filter(|r| r.validation.as_ref().map(|v| !v.passes).unwrap_or(false))
        .count();
    println!("processed {} snippet(s)", results.len());
    println!("errors: {errors}");
    println!("transparency failures: {failed}");
    println!("results: {}", results_path.display());
    // Partial failures are recorded per record; only a total loss is fatal.
    Ok(if !results.is_empty() && errors == results.len() { 1 } else { 0 })
}

/// A scoreable line of `results.jsonl`. Accepts either the pipeline's own
/// output (`rewrite_raw`) or externally produced predictions (`rewrite`).
#[derive(Debug, Deserialize)]
struct PredictionRecord {
    snippet_id: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    rewrite_raw: Option<String>,
    #[serde(default)]
    rewrite: Option<String>,
    #[serde(default)]
    validation: Option<serde_json::Value>,
}

fn load_predictions(path: &Path) -> Result<Vec<(String, String, String, bool)>> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut records = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        let rewrite = record
            .rewrite_raw
            .or(record.rewrite)
            .with_context(|| format!("{}:{}: record has neither rewrite_raw nor rewrite", path.display(), idx + 1))?;
        let source = record.source.unwrap_or_default();
        let failed = record
            .validation
            .as_ref()
            .and_then(|v| v.get("passes"))
            .and_then(|p| p.as_bool())
            .map(|passes| !passes)
            .unwrap_or(false);
        records.push((record.snippet_id, source, rewrite, failed));
    }
    Ok(records)
}

pub fn format_eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12} {:>8}\n", "metric", "value"));
    out.push_str(&format!("{:<12} {:>8.3}\n", "sari_add", report.mean_add_f1));
    out.push_str(&format!("{:<12} {:>8.3}\n", "sari", report.mean_sari));
    out.push_str(&format!("{:<12} {:>8.3}\n", "err_rate", report.transparency_error_rate));
    out.push_str(&format!("{:<12} {:>8}\n", "n", report.n));
    out.push_str(&format!("{:<12} {:>8}\n", "excluded", report.excluded));
    out
}

pub fn cmd_eval(results_path: &Path, gold_path: &Path) -> Result<i32> {
    let gold = corpus::load_gold(gold_path)?;
    let predictions = load_predictions(results_path)?;
    let report = evaluate_run(
        predictions.iter().map(|(id, source, rewrite, failed)| ScoredPrediction {
            snippet_id: id,
            source,
            rewrite_raw: rewrite,
            transparency_failed: *failed,
        }),
        &gold,
    );
    print!("{}", format_eval_table(&report));
    println!("{}", serde_json::to_string(&report)?);
    Ok(0)
}

#[derive(Debug, Deserialize)]
struct GridFile {
    #[serde(default)]
    cell: Vec<GridCell>,
}

pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<28} {:>8} {:>8} {:>9} {:>5}\n", "cell", "sari_add", "sari", "err_rate", "n"));
    for row in rows {
        match &row.outcome {
            AblationOutcome::Ok { report } => {
                out.push_str(&format!(
                    "{:<28} {:>8.3} {:>8.3} {:>9.3} {:>5}\n",
                    row.label, report.mean_add_f1, report.mean_sari, report.transparency_error_rate, report.n
                ));
            }
            AblationOutcome::Unavailable { reason } => {
                out.push_str(&format!("{:<28} unavailable: {reason}\n", row.label));
            }
        }
    }
    out
}

pub fn cmd_ablate(config: &RunConfig, grid_path: &Path) -> Result<i32> {
    let corpus = load_corpus(config)?;
    let body = fs::read_to_string(grid_path).with_context(|| format!("reading {}", grid_path.display()))?;
    let grid: GridFile = toml::from_str(&body).with_context(|| format!("parsing {}", grid_path.display()))?;
    if grid.cell.is_empty() {
        bail!("{}: grid file defines no cells", grid_path.display());
    }
    let settings = config.settings()?;
    let backend = config.build_backend()?;
    let cache = open_cache(config)?;
    let mut client = LlmClient::new(backend.as_ref()).with_retry(config.retry_policy());
    if let Some(cache) = &cache {
        client = client.with_cache(cache);
    }
    let templates = load_templates(config)?;
    let rows = run_ablation(
        &corpus.docs,
        &corpus.snippets,
        &corpus.gold,
        &client,
        &templates,
        &settings,
        &grid.cell,
    )?;
    print!("{}", format_ablation_table(&rows));
    if let Some(out_dir) = &config.output.out_dir {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join("ablation.json");
        fs::write(&path, serde_json::to_vec_pretty(&rows)?)?;
        println!("ablation report: {}", path.display());
    }
    Ok(0)
}

#[derive(Debug, Deserialize)]
struct RewriteRecord {
    snippet_id: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    original: Option<String>,
    #[serde(default)]
    rewrite_raw: Option<String>,
    #[serde(default)]
    rewrite: Option<String>,
}

pub fn cmd_validate_rewrites(path: &Path, tolerance: usize) -> Result<i32> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut total = 0usize;
    let mut failures = 0usize;
    for (idx, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RewriteRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        let original = record
            .original
            .or(record.source)
            .with_context(|| format!("{}:{}: record has neither original nor source", path.display(), idx + 1))?;
        let rewrite = record
            .rewrite_raw
            .or(record.rewrite)
            .with_context(|| format!("{}:{}: record has neither rewrite_raw nor rewrite", path.display(), idx + 1))?;
        let report = check_transparency(&original, &rewrite, tolerance);
        total += 1;
        if !report.passes {
            failures += 1;
            println!(
                "FAIL {}: violations={:?} unbalanced={} sentences {}->{}",
                record.snippet_id,
                report.violations,
                report.unbalanced_brackets,
                report.sentence_count_original,
                report.sentence_count_rewrite
            );
        }
    }
    println!("checked {total} rewrite(s), {failures} failure(s)");
    if total > 0 {
        println!("format error rate: {:.3}", failures as f64 / total as f64);
    }
    Ok(if failures > 0 { 1 } else { 0 })
}

pub fn cmd_cache_inspect(config: &RunConfig) -> Result<i32> {
    let Some(cache) = open_cache(config)? else {
        bail!("config defines no output.cache_dir");
    };
    let (count, bytes) = cache.stats()?;
    println!("cache dir: {}", cache.dir().display());
    println!("entries: {count}");
    println!("bytes: {bytes}");
    Ok(0)
}

pub fn cmd_cache_clear(config: &RunConfig) -> Result<i32> {
    let Some(cache) = open_cache(config)? else {
        bail!("config defines no output.cache_dir");
    };
    let removed = cache.clear()?;
    println!("removed {removed} cache entr(ies)");
    Ok(0)
}
