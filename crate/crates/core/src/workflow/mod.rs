//! Guarded case state machine and the pipeline that drives it.

mod engine;
mod guards;
mod state;

pub use engine::{
    run_case, CaseDossier, CaseStore, ChatReply, Engine, EngineError, MemoryCaseStore, PassRecord, PassStatus,
    PipelineConfig, PipelineContext, PipelineMode, StoredCritique, StoredDraft,
};
pub use guards::{evaluate_guards, GuardConfig, GuardOutcome, GuardReason};
pub use state::{
    advance, successor, transition_table_json, CaseState, EscalationCause, EventKind, Transition, TransitionError,
    TransitionRule, WorkflowCase, WorkflowEvent, CRITIQUE_CYCLE_CAP, TRANSITIONS,
};
