//! The case state machine. [`advance`] is pure: the successor depends only on
//! the case, the event and the timestamp.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;
use crate::governance::HumanAction;
use crate::workflow::GuardReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseState {
    Ingest,
    Analyze,
    Critique,
    Revise,
    Decision,
    AwaitingHumanAuth,
    Record,
    Escalated,
    /// Closed by a human from `Escalated` without a recorded outcome.
    Closed,
}

impl CaseState {
    pub const ALL: [CaseState; 9] = [
        CaseState::Ingest,
        CaseState::Analyze,
        CaseState::Critique,
        CaseState::Revise,
        CaseState::Decision,
        CaseState::AwaitingHumanAuth,
        CaseState::Record,
        CaseState::Escalated,
        CaseState::Closed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, CaseState::Record | CaseState::Closed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseState::Ingest => "ingest",
            CaseState::Analyze => "analyze",
            CaseState::Critique => "critique",
            CaseState::Revise => "revise",
            CaseState::Decision => "decision",
            CaseState::AwaitingHumanAuth => "awaiting_human_auth",
            CaseState::Record => "record",
            CaseState::Escalated => "escalated",
            CaseState::Closed => "closed",
        }
    }

    pub fn parse(s: &str) -> Option<CaseState> {
        CaseState::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for CaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum EscalationCause {
    Guard(GuardReason),
    BackendUnavailable,
    ToolFailure,
    NonConvergent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum WorkflowEvent {
    IngestComplete,
    DraftProduced { draft_id: String },
    CriticClean { critique_id: String },
    CriticFlagsFound { critique_id: String },
    /// Agent-only configuration: the critique stage is bypassed.
    CritiqueSkipped,
    RevisionProduced { draft_id: String },
    RecommendationFinalized,
    HumanDecision { reviewer_id: String, action: HumanAction },
    Escalate { cause: EscalationCause },
    EscalationResolved { reviewer_id: String },
    ClosedByHuman { reviewer_id: String },
}

/// Event classes the transition table is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IngestComplete,
    DraftProduced,
    CriticClean,
    CriticFlagsFound,
    CritiqueSkipped,
    RevisionProduced,
    RecommendationFinalized,
    /// A reviewer's accept, modify or override.
    HumanAuthorization,
    /// A reviewer's escalate action.
    HumanEscalation,
    Escalate,
    EscalationResolved,
    ClosedByHuman,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::IngestComplete,
        EventKind::DraftProduced,
        EventKind::CriticClean,
        EventKind::CriticFlagsFound,
        EventKind::CritiqueSkipped,
        EventKind::RevisionProduced,
        EventKind::RecommendationFinalized,
        EventKind::HumanAuthorization,
        EventKind::HumanEscalation,
        EventKind::Escalate,
        EventKind::EscalationResolved,
        EventKind::ClosedByHuman,
    ];
}

impl WorkflowEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            WorkflowEvent::IngestComplete => EventKind::IngestComplete,
            WorkflowEvent::DraftProduced { .. } => EventKind::DraftProduced,
            WorkflowEvent::CriticClean { .. } => EventKind::CriticClean,
            WorkflowEvent::CriticFlagsFound { .. } => EventKind::CriticFlagsFound,
            WorkflowEvent::CritiqueSkipped => EventKind::CritiqueSkipped,
            WorkflowEvent::RevisionProduced { .. } => EventKind::RevisionProduced,
            WorkflowEvent::RecommendationFinalized => EventKind::RecommendationFinalized,
            WorkflowEvent::HumanDecision { action, .. } => match action {
                HumanAction::Escalate => EventKind::HumanEscalation,
                _ => EventKind::HumanAuthorization,
            },
            WorkflowEvent::Escalate { .. } => EventKind::Escalate,
            WorkflowEvent::EscalationResolved { .. } => EventKind::EscalationResolved,
            WorkflowEvent::ClosedByHuman { .. } => EventKind::ClosedByHuman,
        }
    }

    pub fn reviewer_id(&self) -> Option<&str> {
        match self {
            WorkflowEvent::HumanDecision { reviewer_id, .. }
            | WorkflowEvent::EscalationResolved { reviewer_id }
            | WorkflowEvent::ClosedByHuman { reviewer_id } => Some(reviewer_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub from: CaseState,
    pub event: EventKind,
    pub to: CaseState,
}

const fn rule(from: CaseState, event: EventKind, to: CaseState) -> TransitionRule {
    TransitionRule { from, event, to }
}

use CaseState as S;
use EventKind as E;

/// The complete transition table. Anything not listed is illegal.
pub const TRANSITIONS: &[TransitionRule] = &[
    rule(S::Ingest, E::IngestComplete, S::Analyze),
    rule(S::Analyze, E::DraftProduced, S::Critique),
    rule(S::Critique, E::CriticFlagsFound, S::Revise),
    rule(S::Critique, E::CriticClean, S::Decision),
    rule(S::Critique, E::CritiqueSkipped, S::Decision),
    rule(S::Revise, E::RevisionProduced, S::Decision),
    rule(S::Decision, E::RecommendationFinalized, S::AwaitingHumanAuth),
    rule(S::AwaitingHumanAuth, E::HumanAuthorization, S::Record),
    rule(S::AwaitingHumanAuth, E::HumanEscalation, S::Escalated),
    rule(S::Ingest, E::Escalate, S::Escalated),
    rule(S::Analyze, E::Escalate, S::Escalated),
    rule(S::Critique, E::Escalate, S::Escalated),
    rule(S::Revise, E::Escalate, S::Escalated),
    rule(S::Decision, E::Escalate, S::Escalated),
    rule(S::Escalated, E::EscalationResolved, S::AwaitingHumanAuth),
    rule(S::Escalated, E::ClosedByHuman, S::Closed),
];

pub fn successor(from: CaseState, event: EventKind) -> Option<CaseState> {
    TRANSITIONS
        .iter()
        .find(|r| r.from == from && r.event == event)
        .map(|r| r.to)
}

/// Machine-readable table for documentation and progress rendering.
pub fn transition_table_json() -> serde_json::Value {
    serde_json::json!({
        "states": CaseState::ALL,
        "terminal": CaseState::ALL.iter().filter(|s| s.is_terminal()).collect::<Vec<_>>(),
        "initial": CaseState::Ingest,
        "critique_cycle_cap": CRITIQUE_CYCLE_CAP,
        "transitions": TRANSITIONS,
    })
}

pub const CRITIQUE_CYCLE_CAP: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: CaseState,
    pub to: CaseState,
    pub event: WorkflowEvent,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowCase {
    pub case_id: String,
    pub state: CaseState,
    pub submission_ref: String,
    pub critique_cycles_used: u8,
    pub draft_history: Vec<String>,
    pub critique_history: Vec<String>,
    pub transition_log: Vec<Transition>,
}

impl WorkflowCase {
    pub fn new(case_id: &str, submission_ref: &str) -> Self {
        Self {
            case_id: case_id.into(),
            state: CaseState::Ingest,
            submission_ref: submission_ref.into(),
            critique_cycles_used: 0,
            draft_history: Vec::new(),
            critique_history: Vec::new(),
            transition_log: Vec::new(),
        }
    }

    /// Replays a transition log from the initial state.
    pub fn replay(case_id: &str, submission_ref: &str, log: &[Transition]) -> Result<Self, TransitionError> {
        log.iter().try_fold(WorkflowCase::new(case_id, submission_ref), |case, t| {
            advance(&case, &t.event, t.at)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("{event:?} is not legal in state {state}")]
    IllegalTransition { state: CaseState, event: EventKind },
    #[error("the critique cycle is already used; the case proceeds to decision with its flags unresolved")]
    CycleExhausted,
    #[error("human event without a reviewer identity")]
    MissingReviewer,
    #[error("timestamp {at:?} is not after the last transition at {last:?}")]
    ClockRegression { at: Timestamp, last: Timestamp },
}

pub fn advance(case: &WorkflowCase, event: &WorkflowEvent, at: Timestamp) -> Result<WorkflowCase, TransitionError> {
    if let Some(last) = case.transition_log.last() {
        if at <= last.at {
            return Err(TransitionError::ClockRegression { at, last: last.at });
        }
    }
    let kind = event.kind();
    if kind == EventKind::CriticFlagsFound && case.critique_cycles_used >= CRITIQUE_CYCLE_CAP {
        return Err(TransitionError::CycleExhausted);
    }
    if let Some(reviewer) = event.reviewer_id() {
        if reviewer.trim().is_empty() {
            return Err(TransitionError::MissingReviewer);
        }
    }
    let to = successor(case.state, kind).ok_or(TransitionError::IllegalTransition {
        state: case.state,
        event: kind,
    })?;
    let mut next = case.clone();
    match event {
        WorkflowEvent::DraftProduced { draft_id } => next.draft_history.push(draft_id.clone()),
        WorkflowEvent::CriticClean { critique_id } | WorkflowEvent::CriticFlagsFound { critique_id } => {
            next.critique_history.push(critique_id.clone())
        }
        WorkflowEvent::RevisionProduced { draft_id } => {
            next.draft_history.push(draft_id.clone());
            next.critique_cycles_used += 1;
        }
        _ => {}
    }
    next.state = to;
    next.transition_log.push(Transition {
        from: case.state,
        to,
        event: event.clone(),
        at,
    });
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: i64) -> Timestamp {
        Timestamp(t)
    }

    fn drive(events: &[WorkflowEvent]) -> Result<WorkflowCase, TransitionError> {
        let mut case = WorkflowCase::new("c", "s");
        for (i, e) in events.iter().enumerate() {
            case = advance(&case, e, at(i as i64 + 1))?;
        }
        Ok(case)
    }

    #[test]
    fn clean_critique_skips_revision() {
        let case = drive(&[
            WorkflowEvent::IngestComplete,
            WorkflowEvent::DraftProduced { draft_id: "d1".into() },
            WorkflowEvent::CriticClean { critique_id: "k1".into() },
        ])
        .unwrap();
        assert_eq!(case.state, CaseState::Decision);
        assert_eq!(case.critique_cycles_used, 0);
    }

    #[test]
    fn record_is_terminal() {
        let mut case = WorkflowCase::new("c", "s");
        case.state = CaseState::Record;
        for kind_event in [
            WorkflowEvent::IngestComplete,
            WorkflowEvent::Escalate { cause: EscalationCause::NonConvergent },
            WorkflowEvent::HumanDecision { reviewer_id: "r".into(), action: HumanAction::Accept },
        ] {
            assert!(matches!(advance(&case, &kind_event, at(1)), Err(TransitionError::IllegalTransition { .. })));
        }
    }

    #[test]
    fn second_flags_found_is_cycle_exhausted() {
        let mut case = WorkflowCase::new("c", "s");
        case.state = CaseState::Revise;
        case.critique_cycles_used = 1;
        let e = WorkflowEvent::CriticFlagsFound { critique_id: "k2".into() };
        assert_eq!(advance(&case, &e, at(1)), Err(TransitionError::CycleExhausted));
    }

    #[test]
    fn awaiting_auth_only_takes_human_decisions() {
        let mut case = WorkflowCase::new("c", "s");
        case.state = CaseState::AwaitingHumanAuth;
        for kind in EventKind::ALL {
            let allowed = successor(CaseState::AwaitingHumanAuth, kind).is_some();
            assert_eq!(
                allowed,
                matches!(kind, EventKind::HumanAuthorization | EventKind::HumanEscalation),
                "{kind:?}"
            );
        }
        let e = WorkflowEvent::HumanDecision { reviewer_id: " ".into(), action: HumanAction::Accept };
        assert_eq!(advance(&case, &e, at(1)), Err(TransitionError::MissingReviewer));
    }

    #[test]
    fn clock_must_advance() {
        let case = drive(&[WorkflowEvent::IngestComplete]).unwrap();
        let e = WorkflowEvent::DraftProduced { draft_id: "d".into() };
        assert!(matches!(advance(&case, &e, at(1)), Err(TransitionError::ClockRegression { .. })));
    }

    #[test]
    fn replay_reproduces_the_case() {
        let case = drive(&[
            WorkflowEvent::IngestComplete,
            WorkflowEvent::DraftProduced { draft_id: "d1".into() },
            WorkflowEvent::CriticFlagsFound { critique_id: "k1".into() },
            WorkflowEvent::RevisionProduced { draft_id: "d2".into() },
            WorkflowEvent::RecommendationFinalized,
        ])
        .unwrap();
        assert_eq!(WorkflowCase::replay("c", "s", &case.transition_log).unwrap(), case);
        assert_eq!(case.draft_history.len(), 1 + case.critique_cycles_used as usize);
    }

    #[test]
    fn table_json_is_exported() {
        let v = transition_table_json();
        assert_eq!(v["transitions"].as_array().unwrap().len(), TRANSITIONS.len());
        assert_eq!(v["transitions"][0]["from"], "ingest");
    }
}
