//! Strict parsing of agent and critic output.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{ChatAnswer, CritiqueReport, DraftDecision, Recommendation, StepLabel, Verdict};

/// Field-name tokens that would name a binding action. The stem (without a
/// trailing `e`) is matched as a prefix of any `_`/`-`/camelCase-separated
/// token of any object key, so `issuance` and `executor` match too.
pub const BINDING_ACTION_DENYLIST: [&str; 6] = ["bind", "execute", "issue", "commit", "write", "authorize"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    Malformed,
    UnknownField,
    MissingField,
    BindingActionField,
    RangeViolation,
    InvariantViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{reason:?} at {path}: {detail}")]
pub struct SchemaViolation {
    pub reason: ViolationReason,
    /// JSON-pointer-like location, `$` for the document root.
    pub path: String,
    pub detail: String,
}

impl SchemaViolation {
    fn new(reason: ViolationReason, path: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            reason,
            path: path.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedOutput {
    Draft(DraftDecision),
    Critique(CritiqueReport),
}

fn key_tokens(key: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for ch in key.chars() {
        if !ch.is_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower && !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        prev_lower = ch.is_lowercase() || ch.is_ascii_digit();
        current.extend(ch.to_lowercase());
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Name of the denylisted action a key refers to, if any.
pub fn binding_action_in_key(key: &str) -> Option<&'static str> {
    key_tokens(key).iter().find_map(|t| {
        BINDING_ACTION_DENYLIST
            .iter()
            .copied()
            .find(|word| t.starts_with(word.strip_suffix('e').unwrap_or(word)))
    })
}

fn scan_keys(value: &Value, path: &str) -> Result<(), SchemaViolation> {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let child = format!("{path}/{k}");
                if let Some(word) = binding_action_in_key(k) {
                    return Err(SchemaViolation::new(
                        ViolationReason::BindingActionField,
                        child,
                        format!("field {k:?} names the binding action {word:?}"),
                    ));
                }
                scan_keys(v, &child)?;
            }
            Ok(())
        }
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| scan_keys(v, &format!("{path}/{i}"))),
        _ => Ok(()),
    }
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, SchemaViolation> {
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        let reason = if msg.starts_with("unknown field") {
            ViolationReason::UnknownField
        } else if msg.starts_with("missing field") {
            ViolationReason::MissingField
        } else {
            ViolationReason::Malformed
        };
        SchemaViolation::new(reason, "$", msg)
    })
}

fn parse_object(raw: &str) -> Result<Value, SchemaViolation> {
    let value: Value = serde_json::from_str(raw.trim())
        .map_err(|e| SchemaViolation::new(ViolationReason::Malformed, "$", e.to_string()))?;
    if !value.is_object() {
        return Err(SchemaViolation::new(ViolationReason::Malformed, "$", "top level must be an object"));
    }
    scan_keys(&value, "$")?;
    Ok(value)
}

/// Parses either output kind: objects with a `verdict` key are critiques,
/// everything else must be a draft.
pub fn validate_output(raw: &str) -> Result<ParsedOutput, SchemaViolation> {
    let value = parse_object(raw)?;
    if value.get("verdict").is_some() {
        let report = typed(value)?;
        validate_critique(&report)?;
        Ok(ParsedOutput::Critique(report))
    } else {
        let draft = typed(value)?;
        validate_draft(&draft)?;
        Ok(ParsedOutput::Draft(draft))
    }
}

/// Byte-level entry point; invalid UTF-8 is `Malformed`.
pub fn validate_output_bytes(raw: &[u8]) -> Result<ParsedOutput, SchemaViolation> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| SchemaViolation::new(ViolationReason::Malformed, "$", e.to_string()))?;
    validate_output(text)
}

pub fn parse_draft(raw: &str) -> Result<DraftDecision, SchemaViolation> {
    let value = parse_object(raw)?;
    if value.get("verdict").is_some() {
        return Err(SchemaViolation::new(ViolationReason::UnknownField, "$/verdict", "expected a draft, got a critique"));
    }
    let draft = typed(value)?;
    validate_draft(&draft)?;
    Ok(draft)
}

pub fn parse_critique(raw: &str) -> Result<CritiqueReport, SchemaViolation> {
    let report = typed(parse_object(raw)?)?;
    validate_critique(&report)?;
    Ok(report)
}

pub fn parse_chat(raw: &str) -> Result<ChatAnswer, SchemaViolation> {
    typed(parse_object(raw)?)
}

/// Checks the invariants serde cannot express.
pub fn validate_draft(draft: &DraftDecision) -> Result<(), SchemaViolation> {
    if !(0.0..=1.0).contains(&draft.confidence) {
        return Err(SchemaViolation::new(
            ViolationReason::RangeViolation,
            "$/confidence",
            format!("{} is outside [0, 1]", draft.confidence),
        ));
    }
    if let Some(p) = draft.premium_estimate {
        if !p.is_finite() || p < 0.0 {
            return Err(SchemaViolation::new(ViolationReason::RangeViolation, "$/premium_estimate", format!("{p} is not a non-negative amount")));
        }
    }
    if draft.recommendation == Recommendation::BindWithConditions && draft.conditions.is_empty() {
        return Err(SchemaViolation::new(
            ViolationReason::InvariantViolation,
            "$/conditions",
            "bind_with_conditions requires at least one condition",
        ));
    }
    for (i, claim) in draft.supporting_facts.iter().enumerate() {
        if claim.citations.is_empty() {
            return Err(SchemaViolation::new(
                ViolationReason::InvariantViolation,
                format!("$/supporting_facts/{i}/citations"),
                "every supporting fact needs at least one citation",
            ));
        }
        for (j, c) in claim.citations.iter().enumerate() {
            if let Some(span) = c.span {
                if span.start > span.end {
                    return Err(SchemaViolation::new(
                        ViolationReason::RangeViolation,
                        format!("$/supporting_facts/{i}/citations/{j}/span"),
                        "span start is after its end",
                    ));
                }
            }
        }
    }
    for label in StepLabel::REQUIRED {
        if !draft.reasoning_chain.iter().any(|s| s.label == label) {
            return Err(SchemaViolation::new(
                ViolationReason::MissingField,
                "$/reasoning_chain",
                format!("no {label:?} step"),
            ));
        }
    }
    Ok(())
}

pub fn validate_critique(report: &CritiqueReport) -> Result<(), SchemaViolation> {
    let clean = report.verdict == Verdict::Clean;
    if clean != report.flags.is_empty() {
        return Err(SchemaViolation::new(
            ViolationReason::InvariantViolation,
            "$/verdict",
            "verdict must be clean exactly when there are no flags",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "recommendation": "bind",
            "conditions": [],
            "premium_estimate": 4200.0,
            "supporting_facts": [],
            "flags": [],
            "confidence": 0.9,
            "reasoning_chain": [
                { "label": "risk_factor_extraction", "text": "none" },
                { "label": "guideline_compliance_check", "text": "ok" },
                { "label": "premium_computation", "text": "base" }
            ]
        })
    }

    fn reason(v: Value) -> ViolationReason {
        validate_output(&v.to_string()).unwrap_err().reason
    }

    #[test]
    fn minimal_bind_parses() {
        let parsed = validate_output(&minimal().to_string()).unwrap();
        assert!(matches!(parsed, ParsedOutput::Draft(d) if d.recommendation == Recommendation::Bind));
    }

    #[test]
    fn binding_action_fields_are_rejected() {
        for key in ["issue_policy", "execute_bind", "bindPolicy", "commit", "write_back", "authorized_by", "policyIssuance"] {
            let mut v = minimal();
            v[key] = json!(true);
            assert_eq!(reason(v), ViolationReason::BindingActionField, "{key}");
        }
        let mut nested = minimal();
        nested["supporting_facts"] = json!([{ "claim_text": "x", "citations": [], "execute": 1 }]);
        let err = validate_output(&nested.to_string()).unwrap_err();
        assert_eq!(err.reason, ViolationReason::BindingActionField);
        assert_eq!(err.path, "$/supporting_facts/0/execute");
    }

    #[test]
    fn unknown_and_missing_fields() {
        let mut v = minimal();
        v["notes"] = json!("x");
        assert_eq!(reason(v), ViolationReason::UnknownField);
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("confidence");
        assert_eq!(reason(v), ViolationReason::MissingField);
    }

    #[test]
    fn confidence_range() {
        let mut v = minimal();
        v["confidence"] = json!(1.3);
        assert_eq!(reason(v), ViolationReason::RangeViolation);
        let mut v = minimal();
        v["confidence"] = json!(-0.01);
        assert_eq!(reason(v), ViolationReason::RangeViolation);
    }

    #[test]
    fn invariants() {
        let mut v = minimal();
        v["recommendation"] = json!("bind_with_conditions");
        assert_eq!(reason(v), ViolationReason::InvariantViolation);
        let mut v = minimal();
        v["supporting_facts"] = json!([{ "claim_text": "x", "citations": [] }]);
        assert_eq!(reason(v), ViolationReason::InvariantViolation);
        let mut v = minimal();
        v["reasoning_chain"] = json!([]);
        assert_eq!(reason(v), ViolationReason::MissingField);
        assert_eq!(reason(json!({ "verdict": "clean", "flags": [{
            "category": "logical_incoherence", "severity": "minor",
            "target_claim": { "reasoning_step": 0 }, "evidence": [], "narrative": "n" }] })),
            ViolationReason::InvariantViolation);
    }

    #[test]
    fn malformed_inputs() {
        for raw in ["", "null", "[1]", "{", "\"x\"", "{\"recommendation\": 3}"] {
            assert_eq!(validate_output(raw).unwrap_err().reason, ViolationReason::Malformed, "{raw}");
        }
        assert!(validate_output_bytes(&[0xff, 0xfe]).is_err());
    }

    #[test]
    fn critique_parses() {
        let raw = json!({ "verdict": "issues_found", "flags": [{
            "category": "unsupported_assumption", "severity": "major",
            "target_claim": { "supporting_fact": 1 }, "evidence": [], "narrative": "n" }] });
        assert!(matches!(validate_output(&raw.to_string()).unwrap(), ParsedOutput::Critique(r) if r.flags.len() == 1));
    }

    #[test]
    fn key_tokenizer() {
        assert_eq!(key_tokens("policyIssuance_date"), vec!["policy", "issuance", "date"]);
        assert_eq!(binding_action_in_key("recommendation"), None);
        assert_eq!(binding_action_in_key("flag_resolutions"), None);
        assert_eq!(binding_action_in_key("quoted_text"), None);
    }
}
