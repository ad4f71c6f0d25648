//! Natural-language authority overreach. The output schema already has no
//! field that could execute a binding act; this catches drafts whose text
//! claims or orders one.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::DraftDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPattern {
    /// "I have bound the risk", "policy has been bound".
    CompletedBinding,
    /// Orders addressed to a system of record: "issue the policy", "update the PAS".
    SystemImperative,
    /// "quote issued to broker", "sent the binding quote".
    QuoteIssuance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMatch {
    pub pattern: BoundaryPattern,
    /// Where in the draft the text was found, e.g. `conditions[0]`.
    pub location: String,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub matches: Vec<BoundaryMatch>,
}

impl BoundaryReport {
    pub fn violated(&self) -> bool {
        !self.matches.is_empty()
    }
}

fn patterns() -> &'static [(BoundaryPattern, Regex)] {
    static PATTERNS: OnceLock<Vec<(BoundaryPattern, Regex)>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let build = |p, re: &str| (p, Regex::new(&format!("(?i){re}")).expect("boundary pattern compiles"));
        vec![
            build(
                BoundaryPattern::CompletedBinding,
                r"\b(i|we)\s+(have\s+|'ve\s+)?(already\s+)?(bound|issued|executed|placed)\b",
            ),
            build(
                BoundaryPattern::CompletedBinding,
                r"\b(policy|coverage|risk|account)\s+(has|have|is|was)\s+(now\s+)?(been\s+)?(bound|issued|placed|executed|in\s+force)\b",
            ),
            build(
                BoundaryPattern::CompletedBinding,
                r"\bbound\s+(the\s+|this\s+)?(policy|coverage|risk|account)\b",
            ),
            build(
                BoundaryPattern::SystemImperative,
                r"(^|[.;:!]\s*)(please\s+)?(bind|issue|execute|commit|record|finalize)\s+(the\s+|this\s+)?(policy|coverage|quote|binder|risk)\b",
            ),
            build(
                BoundaryPattern::SystemImperative,
                r"\b(update|write\s+to|post\s+to|commit\s+to|push\s+to)\s+(the\s+)?(policy\s+administration(\s+system)?|system\s+of\s+record|rating\s+system|pas)\b",
            ),
            build(
                BoundaryPattern::QuoteIssuance,
                r"\bquotes?\s+(has\s+been\s+|have\s+been\s+|was\s+|were\s+)?(issued|sent|released|delivered)\b",
            ),
            build(
                BoundaryPattern::QuoteIssuance,
                r"\b(issued|sent|released|delivered)\s+(a\s+|the\s+)?(binding\s+|final\s+)?quote\b",
            ),
        ]
    })
}

/// Scans one piece of text and returns the pattern classes it matches.
pub fn scan_text(text: &str) -> Vec<(BoundaryPattern, String)> {
    let mut found: Vec<(BoundaryPattern, String)> = Vec::new();
    for (pattern, re) in patterns() {
        if let Some(m) = re.find(text) {
            if !found.iter().any(|(p, _)| p == pattern) {
                found.push((*pattern, m.as_str().trim().to_string()));
            }
        }
    }
    found
}

pub fn detect_boundary_violation(draft: &DraftDecision) -> BoundaryReport {
    let mut texts: Vec<(String, &str)> = Vec::new();
    for (i, c) in draft.conditions.iter().enumerate() {
        texts.push((format!("conditions[{i}]"), c));
    }
    for (i, f) in draft.supporting_facts.iter().enumerate() {
        texts.push((format!("supporting_facts[{i}]"), &f.claim_text));
    }
    for (i, f) in draft.flags.iter().enumerate() {
        texts.push((format!("flags[{i}]"), f));
    }
    for (i, s) in draft.reasoning_chain.iter().enumerate() {
        texts.push((format!("reasoning_chain[{i}]"), &s.text));
    }
    let mut matches = Vec::new();
    for (location, text) in texts {
        for (pattern, excerpt) in scan_text(text) {
            matches.push(BoundaryMatch {
                pattern,
                location: location.clone(),
                excerpt,
            });
        }
    }
    BoundaryReport { matches }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(text: &str) -> Vec<BoundaryPattern> {
        scan_text(text).into_iter().map(|(p, _)| p).collect()
    }

    #[test]
    fn hedged_recommendation_is_fine() {
        assert!(classes("Recommend binding subject to underwriter approval").is_empty());
        assert!(classes("Binding is at the underwriter's discretion once the inspection is received.").is_empty());
        assert!(classes("Refer to a human underwriter; do not quote.").is_empty());
    }

    #[test]
    fn completed_binding_and_quote_issuance() {
        let found = classes("Policy has been bound and quote issued to broker");
        assert!(found.contains(&BoundaryPattern::CompletedBinding));
        assert!(found.contains(&BoundaryPattern::QuoteIssuance));
        assert_eq!(classes("I have bound the risk effective today."), vec![BoundaryPattern::CompletedBinding]);
    }

    #[test]
    fn system_imperatives() {
        assert_eq!(classes("Issue the policy at the quoted premium."), vec![BoundaryPattern::SystemImperative]);
        assert_eq!(
            classes("Premium confirmed. Update the policy administration system with the new limit."),
            vec![BoundaryPattern::SystemImperative]
        );
    }

    #[test]
    fn empty_decline_is_fine() {
        let draft = DraftDecision::minimal(crate::agent::Recommendation::Decline, 0.9);
        assert!(!detect_boundary_violation(&draft).violated());
    }

    #[test]
    fn locations_are_reported() {
        let mut draft = DraftDecision::minimal(crate::agent::Recommendation::Bind, 0.9);
        draft.flags.push("Quote was sent to the broker this morning".into());
        let report = detect_boundary_violation(&draft);
        assert!(report.violated());
        assert_eq!(report.matches[0].location, "flags[0]");
        assert_eq!(report.matches[0].pattern, BoundaryPattern::QuoteIssuance);
    }
}
