use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agent::DraftDecision;
use crate::governance::{detect_boundary_violation, BoundaryReport};

const DEFAULT_GUARDS: &str = include_str!("../../fixtures/appetite.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardReason {
    SchemaInvalid,
    LowConfidence,
    OutOfAppetite,
    NonConvergent,
    BoundaryViolation,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardOutcome {
    pub passed: bool,
    pub reason: GuardReason,
    pub detail: String,
}

impl GuardOutcome {
    pub fn clean() -> Self {
        Self::new(GuardReason::Clean, "all guards passed")
    }

    pub fn new(reason: GuardReason, detail: impl Into<String>) -> Self {
        Self {
            passed: reason == GuardReason::Clean,
            reason,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardConfig {
    pub escalation_threshold: f64,
    /// Lines of business the carrier writes.
    pub appetite: BTreeSet<String>,
}

impl Default for GuardConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_GUARDS).expect("bundled guard config parses")
    }
}

impl GuardConfig {
    pub fn in_appetite(&self, line_of_business: &str) -> bool {
        self.appetite.contains(&line_of_business.trim().to_lowercase())
    }
}

/// Guards on a schema-valid draft, first failure wins: confidence, then
/// appetite, then authority boundary.
pub fn evaluate_guards(line_of_business: &str, draft: &DraftDecision, config: &GuardConfig) -> (GuardOutcome, BoundaryReport) {
    let boundary = detect_boundary_violation(draft);
    let outcome = if draft.confidence < config.escalation_threshold {
        GuardOutcome::new(
            GuardReason::LowConfidence,
            format!("confidence {:.2} is below {:.2}", draft.confidence, config.escalation_threshold),
        )
    } else if !config.in_appetite(line_of_business) {
        GuardOutcome::new(GuardReason::OutOfAppetite, format!("{line_of_business:?} is not in the appetite registry"))
    } else if boundary.violated() {
        let m = &boundary.matches[0];
        GuardOutcome::new(
            GuardReason::BoundaryViolation,
            format!("{:?} at {}: {:?}", m.pattern, m.location, m.excerpt),
        )
    } else {
        GuardOutcome::clean()
    };
    (outcome, boundary)
}
