//! Command-line interface for the decontextualization pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decontext::commands;
use decontext::config::RunConfig;

#[derive(Parser)]
#[command(name = "decontext", version, about = "Decontextualize snippets from scientific documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Path to the TOML run configuration.
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Override corpus.documents.
    #[arg(long)]
    documents: Option<PathBuf>,
    /// Override corpus.snippets.
    #[arg(long)]
    snippets: Option<PathBuf>,
    /// Override corpus.gold.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Override output.out_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override output.cache_dir.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Override run.mode ("qadecontext" or "end_to_end").
    #[arg(long)]
    mode: Option<String>,
    /// Override run.qa_mode ("retrieve", "full_doc", "gold").
    #[arg(long)]
    qa_mode: Option<String>,
    /// Override run.rewrite_inputs (subset of "DQAE").
    #[arg(long)]
    rewrite_inputs: Option<String>,
    /// Override run.question_source ("generated" or "gold").
    #[arg(long)]
    question_source: Option<String>,
    /// Override run.answer_source ("generated" or "gold").
    #[arg(long)]
    answer_source: Option<String>,
    /// Override run.condensation ("tsp", "tasp", "taisp", "full").
    #[arg(long)]
    condensation: Option<String>,
    /// Override retriever.k.
    #[arg(long)]
    k: Option<usize>,
    /// Override backend.concurrency.
    #[arg(long)]
    concurrency: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(v) = &self.documents {
            config.corpus.documents = Some(v.clone());
        }
        if let Some(v) = &self.snippets {
            config.corpus.snippets = Some(v.clone());
        }
        if let Some(v) = &self.gold {
            config.corpus.gold = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            config.output.out_dir = Some(v.clone());
        }
        if let Some(v) = &self.cache_dir {
            config.output.cache_dir = Some(v.clone());
        }
        if let Some(v) = &self.mode {
            config.run.mode = v.clone();
        }
        if let Some(v) = &self.qa_mode {
            config.run.qa_mode = v.clone();
        }
        if let Some(v) = &self.rewrite_inputs {
            config.run.rewrite_inputs = v.clone();
        }
        if let Some(v) = &self.question_source {
            config.run.question_source = v.clone();
        }
        if let Some(v) = &self.answer_source {
            config.run.answer_source = v.clone();
        }
        if let Some(v) = &self.condensation {
            config.run.condensation = v.clone();
        }
        if let Some(v) = self.k {
            config.retriever.k = v;
        }
        if let Some(v) = self.concurrency {
            config.backend.concurrency = v;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check corpus files for schema and referential-integrity problems.
    Validate(ConfigArgs),
    /// Run the pipeline over every snippet and write results.
    Run(ConfigArgs),
    /// Score a results file against gold rewrites.
    Eval {
        /// results.jsonl produced by `run` (or compatible predictions).
        #[arg(long)]
        results: PathBuf,
        /// Gold annotations (JSONL).
        #[arg(long)]
        gold: PathBuf,
    },
    /// Run the oracle/ablation grid and print one row per configuration.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// TOML file with `[[cell]]` entries.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Check rewrites for edit transparency (bracket delineation).
    ValidateRewrites {
        /// JSONL with snippet_id, original/source, and rewrite/rewrite_raw.
        #[arg(long)]
        rewrites: PathBuf,
        /// Unbracketed-token budget.
        #[arg(long, default_value_t = decontext::edits::DEFAULT_TOLERANCE)]
        tolerance: usize,
    },
    /// Inspect or clear the completion cache.
    Cache {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print entry count and total size.
    Inspect,
    /// Delete every cached completion.
    Clear,
}

fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(args) => commands::cmd_validate(&args.load()?),
        Command::Run(args) => commands::cmd_run(&args.load()?),
        Command::Eval { results, gold } => commands::cmd_eval(&results, &gold),
        Command::Ablate { config, grid } => commands::cmd_ablate(&config.load()?, &grid),
        Command::ValidateRewrites { rewrites, tolerance } => commands::cmd_validate_rewrites(&rewrites, tolerance),
        Command::Cache { config, action } => {
            let config = config.load()?;
            match action {
                CacheAction::Inspect => commands::cmd_cache_inspect(&config),
                CacheAction::Clear => commands::cmd_cache_clear(&config),
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
