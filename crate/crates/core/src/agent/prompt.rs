//! Prompt assembly. Templates are versioned text files with `{{name}}`
//! placeholders; rendering is a pure function of its inputs.

use std::fmt::Write as _;

use crate::agent::{CritiqueReport, DraftDecision};
use crate::governance::canonical_json;
use crate::knowledge::{GuidelineChunk, Submission};

pub const PROMPT_VERSION: &str = "v1";

const DRAFT: &str = include_str!("../../fixtures/prompts/v1/draft.txt");
const CRITIQUE: &str = include_str!("../../fixtures/prompts/v1/critique.txt");
const REVISE: &str = include_str!("../../fixtures/prompts/v1/revise.txt");
const CHAT: &str = include_str!("../../fixtures/prompts/v1/chat.txt");
const EXEMPLAR: &str = include_str!("../../fixtures/prompts/v1/exemplar.txt");

/// Single pass over the template: each `{{key}}` is replaced by its value and
/// inserted values are never rescanned. Unknown placeholders are left in
/// place so a template typo is visible in golden files.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = &after[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn guidelines_block(chunks: &[GuidelineChunk]) -> String {
    if chunks.is_empty() {
        return "(none retrieved)\n".into();
    }
    let mut out = String::new();
    for c in chunks {
        let _ = writeln!(out, "[{}] {}\n{}\n", c.chunk_id, c.section_label, c.body);
    }
    out
}

fn fields_block(submission: &Submission) -> String {
    if submission.fields.is_empty() {
        return "(none)\n".into();
    }
    let mut out = String::new();
    for (k, v) in &submission.fields {
        let _ = writeln!(out, "- {k}: {v}");
    }
    out
}

fn documents_block(submission: &Submission) -> String {
    let mut out = String::new();
    for d in &submission.documents {
        let _ = writeln!(out, "--- {} ({}) ---\n{}\n", d.doc_id, d.doc_type, d.text);
    }
    out
}

fn flags_block(critique: &CritiqueReport) -> String {
    let mut out = String::new();
    for (i, f) in critique.flags.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i}. [{}/{}] target {} : {}",
            serde_plain(&f.category),
            serde_plain(&f.severity),
            canonical_json(&f.target_claim),
            f.narrative
        );
        for e in &f.evidence {
            let _ = writeln!(out, "   evidence {}: \"{}\"", e.target_id, e.quoted_text);
        }
    }
    out
}

fn serde_plain<T: serde::Serialize>(value: &T) -> String {
    canonical_json(value).trim_matches('"').to_string()
}

fn base_vars(submission: &Submission) -> [(&'static str, String); 5] {
    // Ground truth never reaches a prompt.
    let s = submission.redacted();
    [
        ("submission_id", s.submission_id.clone()),
        ("line_of_business", s.line_of_business.clone()),
        ("tier", s.tier.to_string()),
        ("fields", fields_block(&s)),
        ("documents", documents_block(&s)),
    ]
}

fn finish(template: &str, vars: Vec<(&'static str, String)>) -> String {
    let borrowed: Vec<(&str, &str)> = vars.iter().map(|(k, v)| (*k, v.as_str())).collect();
    render(template, &borrowed)
}

pub fn draft_prompt(submission: &Submission, guidelines: &[GuidelineChunk]) -> String {
    let mut vars = base_vars(submission).to_vec();
    vars.push(("exemplar", EXEMPLAR.trim_end().to_string()));
    vars.push(("guidelines", guidelines_block(guidelines)));
    finish(DRAFT, vars)
}

pub fn critique_prompt(draft: &DraftDecision, submission: &Submission, guidelines: &[GuidelineChunk]) -> String {
    let mut vars = base_vars(submission).to_vec();
    vars.push(("guidelines", guidelines_block(guidelines)));
    vars.push(("draft", canonical_json(draft)));
    finish(CRITIQUE, vars)
}

pub fn revision_prompt(
    draft: &DraftDecision,
    critique: &CritiqueReport,
    submission: &Submission,
    guidelines: &[GuidelineChunk],
) -> String {
    let mut vars = base_vars(submission).to_vec();
    vars.push(("guidelines", guidelines_block(guidelines)));
    vars.push(("draft", canonical_json(draft)));
    vars.push(("flags", flags_block(critique)));
    finish(REVISE, vars)
}

pub fn chat_prompt(
    question: &str,
    draft: Option<&DraftDecision>,
    submission: &Submission,
    guidelines: &[GuidelineChunk],
) -> String {
    let mut vars = base_vars(submission).to_vec();
    vars.push(("guidelines", guidelines_block(guidelines)));
    vars.push(("draft", draft.map(canonical_json).unwrap_or_else(|| "(no draft)".into())));
    vars.push(("question", question.to_string()));
    finish(CHAT, vars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_replaces_every_occurrence() {
        assert_eq!(render("{{a}}-{{b}}-{{a}}", &[("a", "1"), ("b", "2")]), "1-2-1");
        assert_eq!(render("{{missing}}", &[]), "{{missing}}");
        assert_eq!(render("{{a}}{{b}}", &[("a", "{{b}}"), ("b", "x")]), "{{b}}x");
        assert_eq!(render("open {{ tail", &[]), "open {{ tail");
    }

    #[test]
    fn templates_have_no_leftover_placeholders() {
        let s = Submission::from_json(
            r#"{"submission_id":"S","line_of_business":"office","tier":"simple",
                "documents":[{"doc_id":"app","doc_type":"application","text":"t"}]}"#,
        )
        .unwrap();
        let draft = DraftDecision::minimal(crate::agent::Recommendation::Bind, 0.9);
        let critique = CritiqueReport::clean();
        for p in [
            draft_prompt(&s, &[]),
            critique_prompt(&draft, &s, &[]),
            revision_prompt(&draft, &critique, &s, &[]),
            chat_prompt("why?", Some(&draft), &s, &[]),
        ] {
            assert!(!p.contains("{{"), "{p}");
        }
    }

    #[test]
    fn exemplar_spans_are_exact() {
        let text = "Two-storey office, masonry construction, built 1998. Sprinklered throughout. No losses in five years.";
        assert_eq!(&text[53..75], "Sprinklered throughout");
        assert_eq!(&text[77..101], "No losses in five years.");
        assert!(EXEMPLAR.contains(text));
    }
}
