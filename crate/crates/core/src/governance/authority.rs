use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{validate_draft, DraftDecision, Recommendation};
use crate::clock::Timestamp;
use crate::governance::{canonical_json, AuditEventKind, AuditLedger, AuditRecord, LedgerError};
use crate::workflow::{advance, CaseState, TransitionError, WorkflowCase, WorkflowEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanAction {
    Accept,
    Modify,
    Override,
    Escalate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanDecision {
    pub case_id: String,
    pub action: HumanAction,
    /// Required for Modify and Override; ignored for Accept, which copies the
    /// AI draft verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_recommendation: Option<DraftDecision>,
    pub reviewer_id: String,
    /// Stamped by the gate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
    #[serde(default)]
    pub notes: String,
}

impl HumanDecision {
    pub fn accept(case_id: &str, reviewer_id: &str) -> Self {
        Self {
            case_id: case_id.into(),
            action: HumanAction::Accept,
            final_recommendation: None,
            reviewer_id: reviewer_id.into(),
            timestamp: None,
            notes: String::new(),
        }
    }

    /// Two decisions are the same submission if they differ at most in the
    /// gate-stamped timestamp.
    pub fn same_request(&self, other: &HumanDecision) -> bool {
        let strip = |d: &HumanDecision| HumanDecision {
            timestamp: None,
            ..d.clone()
        };
        strip(self) == strip(other)
    }
}

/// Optimistic concurrency token: a reviewer's view of a case is current while
/// the transition log still has the length they loaded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcurrencyToken {
    pub case_id: String,
    pub version: u64,
}

impl ConcurrencyToken {
    pub fn of(case: &WorkflowCase) -> Self {
        Self {
            case_id: case.case_id.clone(),
            version: case.transition_log.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedOutcome {
    pub outcome_id: String,
    pub case_id: String,
    pub action: HumanAction,
    pub reviewer_id: String,
    pub recommendation: DraftDecision,
    /// The AI's final recommendation, if it produced one.
    pub ai_recommendation: Option<Recommendation>,
    pub notes: String,
    pub recorded_at: Timestamp,
    /// Ledger seq of the `HumanDecision` event this outcome rests on.
    pub human_decision_seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Authorization {
    pub case: WorkflowCase,
    pub outcome: Option<RecordedOutcome>,
    pub records: Vec<AuditRecord>,
}

#[derive(Debug, Error)]
pub enum AuthorizeError {
    #[error("case is in state {0:?}, not awaiting a decision")]
    WrongState(CaseState),
    #[error("decision is for case {decision:?} but the case is {case:?}")]
    CaseMismatch { case: String, decision: String },
    #[error("reviewer_id is empty")]
    MissingReviewer,
    #[error("case changed since it was loaded (token version {presented}, current {current})")]
    StaleCase { presented: u64, current: u64 },
    #[error("{action:?} requires a final_recommendation")]
    MissingFinalRecommendation { action: HumanAction },
    #[error("nothing to accept: the case has no AI recommendation")]
    NothingToAccept,
    #[error("final_recommendation is invalid: {0}")]
    InvalidRecommendation(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn check_common(
    case: &WorkflowCase,
    decision_case: &str,
    reviewer_id: &str,
    expected: CaseState,
    token: &ConcurrencyToken,
) -> Result<(), AuthorizeError> {
    if decision_case != case.case_id || token.case_id != case.case_id {
        let decision = if decision_case != case.case_id {
            decision_case
        } else {
            &token.case_id
        };
        return Err(AuthorizeError::CaseMismatch {
            case: case.case_id.clone(),
            decision: decision.to_string(),
        });
    }
    if reviewer_id.trim().is_empty() {
        return Err(AuthorizeError::MissingReviewer);
    }
    if case.state != expected {
        return Err(AuthorizeError::WrongState(case.state));
    }
    let current = case.transition_log.len() as u64;
    if token.version != current {
        return Err(AuthorizeError::StaleCase {
            presented: token.version,
            current,
        });
    }
    Ok(())
}

/// The human authorization checkpoint and the only producer of `Recorded`
/// ledger events.
///
/// Accept, Modify and Override append `HumanDecision` then `Recorded` and
/// move the case to `Record`. Escalate appends an `Escalation` event and moves
/// it to `Escalated`. `ai_draft` is the latest draft the reviewer was shown.
pub fn authorize(
    case: &WorkflowCase,
    ai_draft: Option<&DraftDecision>,
    decision: &HumanDecision,
    token: &ConcurrencyToken,
    ledger: &AuditLedger,
) -> Result<Authorization, AuthorizeError> {
    check_common(
        case,
        &decision.case_id,
        &decision.reviewer_id,
        CaseState::AwaitingHumanAuth,
        token,
    )?;
    let final_draft = match decision.action {
        HumanAction::Accept => Some(ai_draft.cloned().ok_or(AuthorizeError::NothingToAccept)?),
        HumanAction::Modify | HumanAction::Override => {
            let d = decision
                .final_recommendation
                .clone()
                .ok_or(AuthorizeError::MissingFinalRecommendation {
                    action: decision.action,
                })?;
            validate_draft(&d).map_err(|e| AuthorizeError::InvalidRecommendation(e.to_string()))?;
            Some(d)
        }
        HumanAction::Escalate => None,
    };

    let mut decision = decision.clone();
    let at = ledger.now();
    decision.timestamp.get_or_insert(at);
    let event = WorkflowEvent::HumanDecision {
        reviewer_id: decision.reviewer_id.clone(),
        action: decision.action,
    };
    let next = advance(case, &event, at)?;
    let transition = next.transition_log.last().expect("advance appends a transition");

    let Some(final_draft) = final_draft else {
        let record = ledger.append(
            &case.case_id,
            AuditEventKind::Escalation,
            json!({ "cause": "reviewer_escalated", "decision": decision, "transition": transition }),
        )?;
        return Ok(Authorization {
            case: next,
            outcome: None,
            records: vec![record],
        });
    };

    let human = ledger.append_unchecked(
        &case.case_id,
        AuditEventKind::HumanDecision,
        json!({ "decision": decision, "transition": transition }),
    )?;
    let digest = Sha256::digest(canonical_json(&human).as_bytes());
    let outcome = RecordedOutcome {
        outcome_id: format!("out-{}", hex::encode(&digest[..8])),
        case_id: case.case_id.clone(),
        action: decision.action,
        reviewer_id: decision.reviewer_id.clone(),
        recommendation: final_draft,
        ai_recommendation: ai_draft.map(|d| d.recommendation),
        notes: decision.notes.clone(),
        recorded_at: at,
        human_decision_seq: human.seq,
    };
    let recorded = ledger.append_unchecked(
        &case.case_id,
        AuditEventKind::Recorded,
        json!({ "outcome": outcome }),
    )?;
    Ok(Authorization {
        case: next,
        outcome: Some(outcome),
        records: vec![human, recorded],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionAction {
    /// Put the case back in the reviewer queue.
    ReturnToReview,
    /// Close the case without a recorded outcome.
    Close,
}

/// Human resolution of an escalated case. Never records an outcome.
pub fn resolve_escalation(
    case: &WorkflowCase,
    reviewer_id: &str,
    action: ResolutionAction,
    notes: &str,
    token: &ConcurrencyToken,
    ledger: &AuditLedger,
) -> Result<(WorkflowCase, AuditRecord), AuthorizeError> {
    check_common(case, &token.case_id, reviewer_id, CaseState::Escalated, token)?;
    let event = match action {
        ResolutionAction::ReturnToReview => WorkflowEvent::EscalationResolved {
            reviewer_id: reviewer_id.to_string(),
        },
        ResolutionAction::Close => WorkflowEvent::ClosedByHuman {
            reviewer_id: reviewer_id.to_string(),
        },
    };
    let at = ledger.now();
    let next = advance(case, &event, at)?;
    let record = ledger.append(
        &case.case_id,
        AuditEventKind::Escalation,
        json!({
            "resolution": action,
            "reviewer_id": reviewer_id,
            "notes": notes,
            "transition": next.transition_log.last(),
        }),
    )?;
    Ok((next, record))
}
