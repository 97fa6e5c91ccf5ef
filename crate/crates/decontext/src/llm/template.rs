//! Prompt templates with `{{slot}}` substitution.
//!
//! Templates are plain text files. `{{name}}` is a slot; `{{#name}}...{{/name}}`
//! is an optional block included only when `name` is bound to a non-empty
//! value; `{{^name}}...{{/name}}` is the inverse (included when `name` is
//! absent or empty). Slots outside any block are required; a slot inside a
//! block is only required when the block is included.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template}: unclosed {marker} at byte {pos}")]
    Unclosed { template: String, marker: String, pos: usize },
    #[error("template {template}: block {name:?} opened but never closed")]
    UnclosedBlock { template: String, name: String },
    #[error("template {template}: closing tag {found:?} does not match open block {expected:?}")]
    MismatchedBlock { template: String, expected: String, found: String },
    #[error("template {template}: required slot {slot:?} is not bound")]
    MissingSlot { template: String, slot: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Slot(String),
    Block { name: String, inverted: bool, body: Vec<Segment> },
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    segments: Vec<Segment>,
    required_slots: BTreeSet<String>,
}

pub type Bindings = BTreeMap<String, String>;

impl PromptTemplate {
    pub fn parse(name: &str, body: &str) -> Result<PromptTemplate, TemplateError> {
        let mut stack: Vec<(Option<(String, bool)>, Vec<Segment>)> = vec![(None, Vec::new())];
        let bytes = body.as_bytes();
        let mut pos = 0;
        let mut text_start = 0;
        while pos < bytes.len() {
            if bytes[pos..].starts_with(b"{{") {
                if text_start < pos {
                    stack.last_mut().unwrap().1.push(Segment::Text(body[text_start..pos].to_string()));
                }
                let close = body[pos..].find("}}").ok_or_else(|| TemplateError::Unclosed {
                    template: name.to_string(),
                    marker: "{{".to_string(),
                    pos,
                })? + pos;
                let inner = body[pos + 2..close].trim();
                if let Some(block_name) = inner.strip_prefix('#') {
                    stack.push((Some((block_name.trim().to_string(), false)), Vec::new()));
                } else if let Some(block_name) = inner.strip_prefix('^') {
                    stack.push((Some((block_name.trim().to_string(), true)), Vec::new()));
                } else if let Some(block_name) = inner.strip_prefix('/') {
                    let (open, segments) = stack.pop().unwrap();
                    let (open_name, inverted) = open.ok_or_else(|| TemplateError::MismatchedBlock {
                        template: name.to_string(),
                        expected: "<none>".to_string(),
                        found: block_name.trim().to_string(),
                    })?;
                    if open_name != block_name.trim() {
                        return Err(TemplateError::MismatchedBlock {
                            template: name.to_string(),
                            expected: open_name,
                            found: block_name.trim().to_string(),
                        });
                    }
                    stack.last_mut().unwrap().1.push(Segment::Block {
                        name: open_name,
                        inverted,
                        body: segments,
                    });
                } else {
                    stack.last_mut().unwrap().1.push(Segment::Slot(inner.to_string()));
                }
                pos = close + 2;
                text_start = pos;
            } else {
                pos += 1;
            }
        }
        if text_start < body.len() {
            stack.last_mut().unwrap().1.push(Segment::Text(body[text_start..].to_string()));
        }
        if stack.len() != 1 {
            let (open, _) = stack.pop().unwrap();
            return Err(TemplateError::UnclosedBlock {
                template: name.to_string(),
                name: open.map(|(n, _)| n).unwrap_or_default(),
            });
        }
        let segments = stack.pop().unwrap().1;
        let mut required_slots = BTreeSet::new();
        for segment in &segments {
            if let Segment::Slot(slot) = segment {
                required_slots.insert(slot.clone());
            }
        }
        Ok(PromptTemplate {
            name: name.to_string(),
            segments,
            required_slots,
        })
    }

    pub fn required_slots(&self) -> &BTreeSet<String> {
        &self.required_slots
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        let mut out = String::new();
        self.render_segments(&self.segments, bindings, &mut out)?;
        Ok(out)
    }

    fn render_segments(&self, segments: &[Segment], bindings: &Bindings, out: &mut String) -> Result<(), TemplateError> {
        for segment in segments {
            match segment {
                Segment::Text(text) => out.push_str(text),
                Segment::Slot(slot) => {
                    let value = bindings.get(slot).ok_or_else(|| TemplateError::MissingSlot {
                        template: self.name.clone(),
                        slot: slot.clone(),
                    })?;
                    out.push_str(value);
                }
                Segment::Block { name, inverted, body } => {
                    let bound = bindings.get(name).map(|v| !v.is_empty()).unwrap_or(false);
                    if bound != *inverted {
                        self.render_segments(body, bindings, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_without_slots_is_verbatim() {
        let t = PromptTemplate::parse("t", "no slots here").unwrap();
        assert_eq!(t.render(&Bindings::new()).unwrap(), "no slots here");
    }

    #[test]
    fn substitution_is_byte_deterministic() {
        let t = PromptTemplate::parse("t", "a {{x}} b {{y}} c").unwrap();
        let b = bindings([("x", "1"), ("y", "2")]);
        assert_eq!(t.render(&b).unwrap(), "a 1 b 2 c");
        assert_eq!(t.render(&b).unwrap(), t.render(&b).unwrap());
    }

    #[test]
    fn missing_required_slot_names_the_slot() {
        let t = PromptTemplate::parse("t", "hello {{who}}").unwrap();
        let err = t.render(&Bindings::new()).unwrap_err();
        assert!(err.to_string().contains("who"), "{err}");
    }

    #[test]
    fn optional_block_omitted_leaves_no_dangling_label() {
        let t = PromptTemplate::parse("t", "A\n{{#header}}Header: {{header}}\n{{/header}}B\n").unwrap();
        let with = t.render(&bindings([("header", "Intro")])).unwrap();
        let without = t.render(&Bindings::new()).unwrap();
        assert_eq!(with, "A\nHeader: Intro\nB\n");
        assert_eq!(without, "A\nB\n");
        assert!(!without.contains("Header:"));
    }

    #[test]
    fn empty_binding_omits_block() {
        let t = PromptTemplate::parse("t", "{{#x}}X={{x}}{{/x}}end").unwrap();
        assert_eq!(t.render(&bindings([("x", "")])).unwrap(), "end");
    }

    #[test]
    fn rendered_output_has_no_remaining_markers() {
        let t = PromptTemplate::parse("t", "{{a}} {{#b}}{{b}}{{/b}}").unwrap();
        let out = t.render(&bindings([("a", "x"), ("b", "y")])).unwrap();
        assert!(!out.contains("{{"));
    }

    #[test]
    fn required_slots_exclude_block_interiors() {
        let t = PromptTemplate::parse("t", "{{a}} {{#b}}{{c}}{{/b}}").unwrap();
        assert!(t.required_slots().contains("a"));
        assert!(!t.required_slots().contains("c"));
    }

    #[test]
    fn inverted_block_renders_when_slot_absent() {
        let t = PromptTemplate::parse("t", "{{#x}}has x{{/x}}{{^x}}no x{{/x}}").unwrap();
        assert_eq!(t.render(&bindings([("x", "1")])).unwrap(), "has x");
        assert_eq!(t.render(&Bindings::new()).unwrap(), "no x");
        assert_eq!(t.render(&bindings([("x", "")])).unwrap(), "no x");
    }

    #[test]
    fn mismatched_block_is_an_error() {
        assert!(PromptTemplate::parse("t", "{{#a}}x{{/b}}").is_err());
        assert!(PromptTemplate::parse("t", "{{#a}}x").is_err());
        assert!(PromptTemplate::parse("t", "{{a}").is_err());
    }
}
