use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{RetrievalStore, Submission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationKind {
    SubmissionSpan,
    GuidelineChunk,
    ToolResult,
}

/// Half-open byte range `[start, end)` into UTF-8 text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Span of the first occurrence of `needle` in `haystack`.
    pub fn locate(haystack: &str, needle: &str) -> Option<Span> {
        haystack
            .find(needle)
            .map(|start| Span::new(start, start + needle.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Citation {
    pub kind: CitationKind,
    pub target_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    pub quoted_text: String,
}

impl Citation {
    pub fn submission_span(doc_id: &str, text: &str, quote: &str) -> Option<Citation> {
        Span::locate(text, quote).map(|span| Citation {
            kind: CitationKind::SubmissionSpan,
            target_id: doc_id.to_string(),
            span: Some(span),
            quoted_text: quote.to_string(),
        })
    }

    pub fn guideline(chunk_id: &str, body: &str, quote: &str) -> Option<Citation> {
        Span::locate(body, quote).map(|span| Citation {
            kind: CitationKind::GuidelineChunk,
            target_id: chunk_id.to_string(),
            span: Some(span),
            quoted_text: quote.to_string(),
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("unknown citation target {0:?}")]
    UnknownTarget(String),
    #[error("span {start}..{end} is out of range for {target:?} ({len} bytes)")]
    SpanOutOfRange {
        target: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("quoted text does not match {target:?}: cited {quoted:?}, found {found:?}")]
    QuoteMismatch {
        target: String,
        quoted: String,
        found: String,
    },
}

/// Resolution context. Tool results are optional because they only exist
/// inside a run.
#[derive(Clone, Copy)]
pub struct Resolver<'a> {
    pub submission: &'a Submission,
    pub store: &'a RetrievalStore,
    pub tool_results: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Resolver<'a> {
    pub fn new(submission: &'a Submission, store: &'a RetrievalStore) -> Self {
        Self {
            submission,
            store,
            tool_results: None,
        }
    }

    pub fn with_tool_results(mut self, results: &'a BTreeMap<String, String>) -> Self {
        self.tool_results = Some(results);
        self
    }

    pub fn resolve(&self, citation: &Citation) -> Result<String, ResolveError> {
        let text: &str = match citation.kind {
            CitationKind::SubmissionSpan => &self
                .submission
                .document(&citation.target_id)
                .ok_or_else(|| ResolveError::UnknownTarget(citation.target_id.clone()))?
                .text,
            CitationKind::GuidelineChunk => &self
                .store
                .chunk(&citation.target_id)
                .ok_or_else(|| ResolveError::UnknownTarget(citation.target_id.clone()))?
                .body,
            CitationKind::ToolResult => self
                .tool_results
                .and_then(|r| r.get(&citation.target_id))
                .ok_or_else(|| ResolveError::UnknownTarget(citation.target_id.clone()))?,
        };
        let found = match citation.span {
            None => text,
            Some(span) => text.get(span.start..span.end).ok_or_else(|| {
                ResolveError::SpanOutOfRange {
                    target: citation.target_id.clone(),
                    start: span.start,
                    end: span.end,
                    len: text.len(),
                }
            })?,
        };
        if found != citation.quoted_text {
            return Err(ResolveError::QuoteMismatch {
                target: citation.target_id.clone(),
                quoted: citation.quoted_text.clone(),
                found: found.to_string(),
            });
        }
        Ok(found.to_string())
    }
}

/// A citation together with what it resolved to, for reviewer display.
/// A failed resolution is kept and flagged, never dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCitation {
    pub citation: Citation,
    pub resolved_text: Option<String>,
    pub error: Option<String>,
    /// True when the quoted text does not match the source: a hallucinated
    /// citation.
    pub hallucination_warning: bool,
}

impl<'a> Resolver<'a> {
    pub fn annotate(&self, citation: &Citation) -> ResolvedCitation {
        match self.resolve(citation) {
            Ok(text) => ResolvedCitation {
                citation: citation.clone(),
                resolved_text: Some(text),
                error: None,
                hallucination_warning: false,
            },
            Err(e) => ResolvedCitation {
                citation: citation.clone(),
                resolved_text: None,
                error: Some(e.to_string()),
                hallucination_warning: true,
            },
        }
    }
}

/// Returns the exact text at the cited location.
pub fn resolve_citation(
    citation: &Citation,
    submission: &Submission,
    store: &RetrievalStore,
) -> Result<String, ResolveError> {
    Resolver::new(submission, store).resolve(citation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{Document, GuidelineChunk, Tier};

    fn fixture() -> (Submission, RetrievalStore) {
        let submission = Submission {
            submission_id: "s".into(),
            line_of_business: "habitational".into(),
            tier: Tier::Simple,
            fields: Default::default(),
            documents: vec![Document {
                doc_id: "inspection".into(),
                doc_type: "inspection_report".into(),
                text: "Roof fair. Wiring: original 1970 knob-and-tube. Café on site.".into(),
            }],
            ground_truth: None,
        };
        let store = RetrievalStore::new(vec![GuidelineChunk::new(
            "G-1",
            "Electrical systems in pre-1980 buildings",
            "Buildings constructed before 1980 require an electrical update.",
        )])
        .unwrap();
        (submission, store)
    }

    #[test]
    fn resolves_exact_submission_span() {
        let (s, store) = fixture();
        let c = Citation {
            kind: CitationKind::SubmissionSpan,
            target_id: "inspection".into(),
            span: Some(Span::new(11, 46)),
            quoted_text: "Wiring: original 1970 knob-and-tube".into(),
        };
        assert_eq!(
            resolve_citation(&c, &s, &store).unwrap(),
            "Wiring: original 1970 knob-and-tube"
        );
    }

    #[test]
    fn mismatched_quote_is_distinct_error() {
        let (s, store) = fixture();
        let c = Citation {
            kind: CitationKind::SubmissionSpan,
            target_id: "inspection".into(),
            span: Some(Span::new(0, 22)),
            quoted_text: "monitored alarm system".into(),
        };
        assert!(matches!(
            resolve_citation(&c, &s, &store),
            Err(ResolveError::QuoteMismatch { .. })
        ));
    }

    #[test]
    fn unknown_chunk_is_reported() {
        let (s, store) = fixture();
        let c = Citation {
            kind: CitationKind::GuidelineChunk,
            target_id: "G-404".into(),
            span: None,
            quoted_text: "x".into(),
        };
        assert_eq!(
            resolve_citation(&c, &s, &store),
            Err(ResolveError::UnknownTarget("G-404".into()))
        );
    }

    #[test]
    fn span_inside_multibyte_char_is_out_of_range() {
        let (s, store) = fixture();
        let text = &s.documents[0].text;
        let e_acute = text.find('é').unwrap();
        let c = Citation {
            kind: CitationKind::SubmissionSpan,
            target_id: "inspection".into(),
            span: Some(Span::new(e_acute + 1, e_acute + 3)),
            quoted_text: "x".into(),
        };
        assert!(matches!(
            resolve_citation(&c, &s, &store),
            Err(ResolveError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn offsets_are_bytes_not_codepoints() {
        let (s, store) = fixture();
        let text = &s.documents[0].text;
        let c = Citation::submission_span("inspection", text, "on site").unwrap();
        let start = c.span.unwrap().start;
        // "é" is two bytes, so the byte offset exceeds the char offset by one.
        assert_eq!(start, text[..start].chars().count() + 1);
        assert_eq!(resolve_citation(&c, &s, &store).unwrap(), "on site");
    }

    #[test]
    fn guideline_citation_without_span_covers_body() {
        let (s, store) = fixture();
        let body = store.chunk("G-1").unwrap().body.clone();
        let c = Citation {
            kind: CitationKind::GuidelineChunk,
            target_id: "G-1".into(),
            span: None,
            quoted_text: body.clone(),
        };
        assert_eq!(resolve_citation(&c, &s, &store).unwrap(), body);
    }

    #[test]
    fn tool_results_resolve_only_when_supplied() {
        let (s, store) = fixture();
        let c = Citation {
            kind: CitationKind::ToolResult,
            target_id: "call-1".into(),
            span: None,
            quoted_text: "{\"zone\":\"X\"}".into(),
        };
        assert!(resolve_citation(&c, &s, &store).is_err());
        let mut results = BTreeMap::new();
        results.insert("call-1".to_string(), "{\"zone\":\"X\"}".to_string());
        let resolver = Resolver::new(&s, &store).with_tool_results(&results);
        assert!(resolver.resolve(&c).is_ok());
    }
}
