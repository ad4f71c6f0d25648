//! One backend call per function, parsed and checked. Retrying after a schema
//! violation is the workflow engine's decision.

use crate::agent::prompt;
use crate::agent::{
    parse_chat, parse_critique, parse_draft, AgentEndpoint, BackendRequest, CallContext, ChatAnswer, CriticEndpoint,
    CritiqueFlag, CritiqueReport, DraftDecision, FlagCategory, FlagResolution, GatewayError, ResolutionStatus, Role,
    SchemaViolation, Task, TokenUsage, Verdict, ViolationReason,
};
use crate::agent::backend::Endpoint;
use crate::knowledge::{CitationKind, GuidelineChunk, Submission};

/// Outcome of one backend call. `raw` is the backend text when a response
/// arrived, kept for the audit trail even when it failed validation.
#[derive(Debug)]
pub struct Attempt<T> {
    pub raw: Option<String>,
    pub usage: TokenUsage,
    pub result: Result<T, GatewayError>,
}

impl<T> Attempt<T> {
    fn failed(error: GatewayError) -> Self {
        Self {
            raw: None,
            usage: TokenUsage::default(),
            result: Err(error),
        }
    }
}

fn call<T>(
    endpoint: &Endpoint,
    role: Role,
    task: Task,
    prompt: &str,
    attempt: u32,
    context: CallContext<'_>,
    parse: impl FnOnce(&str) -> Result<T, GatewayError>,
) -> Attempt<T> {
    let request = BackendRequest {
        role,
        task,
        prompt,
        temperature: endpoint.config.temperature,
        max_tokens: endpoint.config.max_output_tokens,
        attempt,
        context,
    };
    match endpoint.backend.complete(&request) {
        Err(e) => Attempt::failed(e.into()),
        Ok(response) => {
            let result = parse(&response.text);
            Attempt {
                usage: TokenUsage::new(response.input_tokens, response.output_tokens),
                raw: Some(response.text),
                result,
            }
        }
    }
}

pub fn generate_draft(
    submission: &Submission,
    guidelines: &[GuidelineChunk],
    agent: &AgentEndpoint,
    attempt: u32,
) -> Attempt<DraftDecision> {
    let prompt = prompt::draft_prompt(submission, guidelines);
    let context = CallContext::new(submission, guidelines);
    call(&agent.0, Role::Agent, Task::Draft, &prompt, attempt, context, |raw| {
        Ok(parse_draft(raw)?)
    })
}

/// Structural checks on a critique of `draft`.
pub fn check_critique(report: &CritiqueReport, draft: &DraftDecision) -> Result<(), SchemaViolation> {
    for (i, flag) in report.flags.iter().enumerate() {
        if !draft.resolves(flag.target_claim) {
            return Err(SchemaViolation {
                reason: ViolationReason::InvariantViolation,
                path: format!("$/flags/{i}/target_claim"),
                detail: format!("{:?} is not an element of the draft", flag.target_claim),
            });
        }
        if flag.category == FlagCategory::FactualInconsistency
            && !flag.evidence.iter().any(|c| c.kind == CitationKind::SubmissionSpan)
        {
            return Err(SchemaViolation {
                reason: ViolationReason::InvariantViolation,
                path: format!("$/flags/{i}/evidence"),
                detail: "a factual inconsistency must cite the contradicting submission span".into(),
            });
        }
    }
    Ok(())
}

pub fn generate_critique(
    draft: &DraftDecision,
    submission: &Submission,
    guidelines: &[GuidelineChunk],
    critic: &CriticEndpoint,
    attempt: u32,
) -> Attempt<CritiqueReport> {
    let prompt = prompt::critique_prompt(draft, submission, guidelines);
    let context = CallContext {
        draft: Some(draft),
        ..CallContext::new(submission, guidelines)
    };
    call(&critic.0, Role::Critic, Task::Critique, &prompt, attempt, context, |raw| {
        let report = parse_critique(raw)?;
        check_critique(&report, draft)?;
        Ok(report)
    })
}

/// Text carried in a revised draft's `flags` for a flag it did not fix.
pub fn carried_flag_text(index: usize, flag: &CritiqueFlag) -> String {
    let category = crate::governance::canonical_json(&flag.category);
    format!(
        "Unresolved review flag {index} ({}): {}",
        category.trim_matches('"'),
        flag.narrative
    )
}

/// Makes every critique flag explicitly resolved: missing resolutions become
/// `Unresolved`, and every flag not `Addressed` is carried in `flags`.
pub fn normalize_resolutions(draft: &mut DraftDecision, critique: &CritiqueReport) -> Result<(), SchemaViolation> {
    let n = critique.flags.len();
    let mut seen = vec![false; n];
    for (i, r) in draft.flag_resolutions.iter().enumerate() {
        if r.flag_index >= n || seen[r.flag_index] {
            return Err(SchemaViolation {
                reason: ViolationReason::InvariantViolation,
                path: format!("$/flag_resolutions/{i}/flag_index"),
                detail: format!("flag_index {} is out of range or repeated", r.flag_index),
            });
        }
        seen[r.flag_index] = true;
    }
    for (index, done) in seen.iter().enumerate() {
        if !done {
            draft.flag_resolutions.push(FlagResolution {
                flag_index: index,
                status: ResolutionStatus::Unresolved,
                note: "no resolution given".into(),
            });
        }
    }
    draft.flag_resolutions.sort_by_key(|r| r.flag_index);
    for r in &draft.flag_resolutions {
        if r.status != ResolutionStatus::Addressed {
            let flag = &critique.flags[r.flag_index];
            let text = carried_flag_text(r.flag_index, flag);
            if !draft.flags.iter().any(|f| f.contains(&flag.narrative)) {
                draft.flags.push(text);
            }
        }
    }
    Ok(())
}

pub fn revise_draft(
    draft: &DraftDecision,
    critique: &CritiqueReport,
    submission: &Submission,
    guidelines: &[GuidelineChunk],
    agent: &AgentEndpoint,
    attempt: u32,
) -> Attempt<DraftDecision> {
    if critique.verdict != Verdict::IssuesFound {
        return Attempt::failed(GatewayError::Precondition("revision requires a critique with issues".into()));
    }
    let prompt = prompt::revision_prompt(draft, critique, submission, guidelines);
    let context = CallContext {
        draft: Some(draft),
        critique: Some(critique),
        ..CallContext::new(submission, guidelines)
    };
    call(&agent.0, Role::Agent, Task::Revise, &prompt, attempt, context, |raw| {
        let mut revised = parse_draft(raw)?;
        normalize_resolutions(&mut revised, critique)?;
        Ok(revised)
    })
}

/// Reviewer question answered by the agent role. Read-only: the result is
/// text and citations, never a state change.
pub fn answer_question(
    question: &str,
    draft: Option<&DraftDecision>,
    submission: &Submission,
    guidelines: &[GuidelineChunk],
    agent: &AgentEndpoint,
) -> Attempt<ChatAnswer> {
    let prompt = prompt::chat_prompt(question, draft, submission, guidelines);
    let context = CallContext {
        draft,
        question: Some(question),
        ..CallContext::new(submission, guidelines)
    };
    call(&agent.0, Role::Agent, Task::Chat, &prompt, 0, context, |raw| Ok(parse_chat(raw)?))
}

/// The two roles a pipeline talks to. Without a critic the pipeline runs in
/// the agent-only configuration.
#[derive(Clone, Debug)]
pub struct AgentGateway {
    pub agent: AgentEndpoint,
    pub critic: Option<CriticEndpoint>,
}

impl AgentGateway {
    pub fn agent_only(agent: AgentEndpoint) -> Self {
        Self { agent, critic: None }
    }

    pub fn with_critic(agent: AgentEndpoint, critic: CriticEndpoint) -> Self {
        Self {
            agent,
            critic: Some(critic),
        }
    }

    /// Both roles served by one backend with default role configs.
    pub fn from_backend(backend: std::sync::Arc<dyn crate::agent::Backend>, with_critic: bool) -> Self {
        use crate::agent::BackendConfig;
        let agent = AgentEndpoint::new(BackendConfig::agent_default(), backend.clone()).expect("agent default config is valid");
        let critic = with_critic
            .then(|| CriticEndpoint::new(BackendConfig::critic_default(), backend).expect("critic default config is valid"));
        Self { agent, critic }
    }
}
