//! Decontextualization of extracted snippets from scientific documents.
//!
//! A snippet pulled out of a paper often cannot be read on its own: it may
//! contain unresolved coreferences, undefined jargon, or references to other
//! documents. This crate rewrites such snippets so they stand alone, using a
//! three-stage chain over a text-completion backend:
//!
//! 1. **Question generation** — ask clarifying questions about the snippet.
//! 2. **Question answering** — answer each question from the source document
//!    (and cited documents), either over retrieved passages or the full text.
//! 3. **Rewriting** — rewrite the snippet, placing added text in square
//!    brackets so edits stay visible to the reader.
//!
//! The crate also ships an end-to-end single-prompt baseline, an ablation
//! harness that swaps any stage's output for gold annotations, a validator
//! for the bracket-edit format, and SARI-based evaluation against gold
//! rewrites.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod edits;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod retrieval;
