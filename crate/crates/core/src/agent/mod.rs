//! Primary agent and critic: output contract, validation, prompts and
//! pluggable backends.

pub mod backend;
pub mod fixture;
pub mod gateway;
pub mod prompt;
pub mod remote;
mod types;
mod validate;

pub use backend::{
    approx_tokens, AgentEndpoint, Backend, BackendConfig, BackendError, BackendRequest, BackendResponse, CallContext,
    CriticEndpoint, GatewayError, Role, Task,
};
pub use fixture::{FixtureBackend, Scenario};
pub use gateway::{answer_question, generate_critique, generate_draft, revise_draft, AgentGateway, Attempt};
pub use remote::RemoteBackend;
pub use types::{
    ChatAnswer, ClaimRef, CritiqueFlag, CritiqueReport, DraftDecision, FlagCategory, FlagResolution, FlagSeverity,
    ReasoningStep, Recommendation, ResolutionStatus, StepLabel, SupportedClaim, TokenUsage, Verdict,
};
pub use validate::{
    binding_action_in_key, parse_chat, parse_critique, parse_draft, validate_critique, validate_draft,
    validate_output, validate_output_bytes, ParsedOutput, SchemaViolation, ViolationReason, BINDING_ACTION_DENYLIST,
};

/// JSON Schema (draft 2020-12) for agent drafts and critic reports.
pub const OUTPUT_SCHEMA: &str = include_str!("../../fixtures/output_schema.json");
