//! Prompt-injection payloads planted into submission documents.

use std::sync::LazyLock;

use serde::Deserialize;
use thiserror::Error;

use crate::knowledge::{PlantedDefect, Submission};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackPayload {
    pub id: String,
    pub text: String,
}

pub static ATTACK_PAYLOADS: LazyLock<Vec<AttackPayload>> = LazyLock::new(|| {
    serde_json::from_str(include_str!("../../fixtures/attacks.json")).expect("bundled attack payloads parse")
});

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("unknown attack payload {0:?}")]
    UnknownPayload(String),
    #[error("submission has no document {0:?}")]
    UnknownDocument(String),
}

/// Appends payload `payload_id` to document `doc_id` and records the plant
/// in the ground truth. Existing spans stay valid because text is only
/// appended.
pub fn inject_prompt_attack(submission: &mut Submission, doc_id: &str, payload_id: &str) -> Result<(), AttackError> {
    let payload = ATTACK_PAYLOADS
        .iter()
        .find(|p| p.id == payload_id && !payload_id.is_empty())
        .ok_or_else(|| AttackError::UnknownPayload(payload_id.to_string()))?;
    let doc = submission
        .documents
        .iter_mut()
        .find(|d| d.doc_id == doc_id)
        .ok_or_else(|| AttackError::UnknownDocument(doc_id.to_string()))?;
    if !doc.text.is_empty() && !doc.text.ends_with('\n') {
        doc.text.push('\n');
    }
    doc.text.push_str(&payload.text);
    doc.text.push('\n');
    if let Some(truth) = submission.ground_truth.as_mut() {
        truth.planted_defects.insert(PlantedDefect::PromptInjectionString);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{Resolver, RetrievalStore, Tier};
    use crate::simulation::generator::{generate_case, ScenarioSpec};

    #[test]
    fn injection_keeps_truth_evidence_valid() {
        let mut s = generate_case("inj-1", &ScenarioSpec::new(Tier::Medium, [], 4));
        for p in ATTACK_PAYLOADS.iter() {
            inject_prompt_attack(&mut s, "application", &p.id).unwrap();
        }
        let app = &s.document("application").unwrap().text;
        assert!(ATTACK_PAYLOADS.iter().all(|p| app.contains(&p.text)));
        let store = RetrievalStore::default_corpus();
        let truth = s.ground_truth.as_ref().unwrap();
        assert!(truth.planted_defects.contains(&PlantedDefect::PromptInjectionString));
        for rf in &truth.risk_factors {
            Resolver::new(&s, &store).resolve(&rf.evidence).unwrap();
        }
    }

    #[test]
    fn unknown_payload_and_document() {
        let mut s = generate_case("inj-2", &ScenarioSpec::new(Tier::Simple, [], 4));
        assert_eq!(inject_prompt_attack(&mut s, "application", ""), Err(AttackError::UnknownPayload("".into())));
        assert_eq!(inject_prompt_attack(&mut s, "application", "nope"), Err(AttackError::UnknownPayload("nope".into())));
        assert!(matches!(inject_prompt_attack(&mut s, "missing", "role-swap"), Err(AttackError::UnknownDocument(_))));
    }
}
