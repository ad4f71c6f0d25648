//! Drives cases through the pipeline and serialises per-case mutations.

use std::collections::BTreeMap;
use std::io;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agent::{
    answer_question, generate_critique, generate_draft, revise_draft, AgentGateway, Attempt, ChatAnswer,
    CritiqueReport, DraftDecision, GatewayError, ResolutionStatus, Task, TokenUsage, Verdict,
};
use crate::clock::Timestamp;
use crate::governance::{
    self, AuditEventKind, AuditLedger, Authorization, AuthorizeError, ConcurrencyToken, HumanDecision,
    LedgerError, RecordedOutcome, ResolutionAction,
};
use crate::knowledge::{
    retrieve_guidelines, GuidelineChunk, ResolvedCitation, Resolver, RetrievalStore, Submission, SubmissionError,
    ToolRegistry,
};
use crate::workflow::{
    advance, evaluate_guards, CaseState, EscalationCause, GuardConfig, GuardOutcome, GuardReason, TransitionError,
    WorkflowCase, WorkflowEvent,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    AgentOnly,
    AgentCritic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub guards: GuardConfig,
    pub retrieval_k: usize,
    /// Backend calls per pass before the case is non-convergent.
    pub max_attempts: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            guards: GuardConfig::default(),
            retrieval_k: 5,
            max_attempts: 2,
        }
    }
}

/// Everything a pipeline run needs besides the submission.
#[derive(Clone)]
pub struct PipelineContext {
    pub gateway: AgentGateway,
    pub tools: Arc<ToolRegistry>,
    pub store: Arc<RetrievalStore>,
    pub ledger: Arc<AuditLedger>,
    pub config: PipelineConfig,
}

impl PipelineContext {
    pub fn mode(&self) -> PipelineMode {
        if self.gateway.critic.is_some() {
            PipelineMode::AgentCritic
        } else {
            PipelineMode::AgentOnly
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDraft {
    pub draft_id: String,
    pub task: Task,
    pub draft: DraftDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredCritique {
    pub critique_id: String,
    pub report: CritiqueReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum PassStatus {
    Valid,
    SchemaViolation(String),
    BackendError(String),
}

/// One backend call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub task: Task,
    pub attempt: u32,
    pub usage: TokenUsage,
    pub status: PassStatus,
}

/// A case and every artifact produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDossier {
    pub case: WorkflowCase,
    pub submission: Submission,
    pub mode: PipelineMode,
    pub submitted_at: Timestamp,
    pub retrieved_chunks: Vec<String>,
    /// Tool call id to canonical output text; citable as `tool_result`.
    pub tool_results: BTreeMap<String, String>,
    pub drafts: Vec<StoredDraft>,
    pub critiques: Vec<StoredCritique>,
    pub guard_outcomes: Vec<GuardOutcome>,
    pub escalation: Option<EscalationCause>,
    /// Critique flags the final draft did not address.
    pub unresolved_flags: Vec<String>,
    pub passes: Vec<PassRecord>,
    /// Backend, tool or ledger failures seen during the run.
    pub system_errors: Vec<String>,
    pub decision: Option<HumanDecision>,
    pub decision_token: Option<ConcurrencyToken>,
    pub outcome: Option<RecordedOutcome>,
}

impl CaseDossier {
    pub fn new(submission: Submission, mode: PipelineMode, submitted_at: Timestamp) -> Self {
        let id = submission.submission_id.clone();
        Self {
            case: WorkflowCase::new(&id, &id),
            submission,
            mode,
            submitted_at,
            retrieved_chunks: Vec::new(),
            tool_results: BTreeMap::new(),
            drafts: Vec::new(),
            critiques: Vec::new(),
            guard_outcomes: Vec::new(),
            escalation: None,
            unresolved_flags: Vec::new(),
            passes: Vec::new(),
            system_errors: Vec::new(),
            decision: None,
            decision_token: None,
            outcome: None,
        }
    }

    pub fn case_id(&self) -> &str {
        &self.case.case_id
    }

    pub fn latest_draft(&self) -> Option<&DraftDecision> {
        self.drafts.last().map(|d| &d.draft)
    }

    pub fn first_draft(&self) -> Option<&DraftDecision> {
        self.drafts.first().map(|d| &d.draft)
    }

    pub fn token(&self) -> ConcurrencyToken {
        ConcurrencyToken::of(&self.case)
    }

    pub fn usage(&self) -> TokenUsage {
        let mut total = TokenUsage::default();
        for p in &self.passes {
            total += p.usage;
        }
        total
    }

    /// `(input, output)` per backend call, for cost estimation.
    pub fn token_passes(&self) -> Vec<(u64, u64)> {
        self.passes
            .iter()
            .map(|p| (p.usage.input_tokens, p.usage.output_tokens))
            .collect()
    }

    pub fn schema_failures(&self) -> usize {
        self.passes
            .iter()
            .filter(|p| matches!(p.status, PassStatus::SchemaViolation(_)))
            .count()
    }

    pub fn resolver<'a>(&'a self, store: &'a RetrievalStore) -> Resolver<'a> {
        Resolver::new(&self.submission, store).with_tool_results(&self.tool_results)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("case {0:?} already exists")]
    DuplicateCase(String),
    #[error("invalid submission: {0}")]
    InvalidSubmission(#[from] SubmissionError),
    #[error(transparent)]
    Authorize(#[from] AuthorizeError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("case store failed: {0}")]
    Store(#[from] io::Error),
    #[error("chat failed: {0}")]
    Chat(GatewayError),
}

struct Run<'a> {
    ctx: &'a PipelineContext,
    dossier: CaseDossier,
}

enum Pass<T> {
    Ok(T),
    Stop,
}

impl<'a> Run<'a> {
    fn case_id(&self) -> String {
        self.dossier.case.case_id.clone()
    }

    /// Applies `event`, then appends one ledger record carrying the transition.
    fn step(&mut self, event: WorkflowEvent, kind: AuditEventKind, mut payload: Value) -> Result<(), EngineError> {
        let at = self.ctx.ledger.now();
        let next = advance(&self.dossier.case, &event, at)?;
        payload["transition"] = json!(next.transition_log.last());
        self.ctx.ledger.append(&next.case_id, kind, payload)?;
        self.dossier.case = next;
        Ok(())
    }

    fn log(&self, kind: AuditEventKind, payload: Value) -> Result<(), EngineError> {
        self.ctx.ledger.append(&self.dossier.case.case_id, kind, payload)?;
        Ok(())
    }

    fn escalate(&mut self, cause: EscalationCause, detail: &str) -> Result<(), EngineError> {
        self.dossier.escalation = Some(cause);
        self.step(
            WorkflowEvent::Escalate { cause },
            AuditEventKind::Escalation,
            json!({ "cause": cause, "detail": detail }),
        )
    }

    fn ingest(&mut self) -> Result<(), EngineError> {
        let s = &self.dossier.submission;
        let payload = json!({
            "submission_id": s.submission_id,
            "line_of_business": s.line_of_business,
            "tier": s.tier,
            "fields": s.fields,
            "documents": s.documents.iter().map(|d| json!({ "doc_id": d.doc_id, "doc_type": d.doc_type, "bytes": d.text.len() })).collect::<Vec<_>>(),
        });
        self.step(WorkflowEvent::IngestComplete, AuditEventKind::Ingested, payload)
    }

    fn retrieval_query(&self) -> String {
        let s = &self.dossier.submission;
        let mut q = s.line_of_business.clone();
        for v in s.fields.values() {
            q.push(' ');
            q.push_str(v);
        }
        for d in &s.documents {
            q.push(' ');
            q.push_str(&d.text);
        }
        q
    }

    fn gather(&mut self) -> Result<Option<Vec<GuidelineChunk>>, EngineError> {
        let case_id = self.case_id();
        let query = self.retrieval_query();
        let k = self.ctx.config.retrieval_k;
        let ids: Vec<String> = if self.ctx.tools.contains("guideline_search") {
            match self
                .ctx
                .tools
                .invoke(&self.ctx.ledger, &case_id, "guideline_search", &json!({ "query": query, "k": k }))
            {
                Ok(r) => {
                    self.dossier.tool_results.insert(r.call_id.clone(), r.output_text.clone());
                    r.output["results"]
                        .as_array()
                        .map(|a| a.iter().filter_map(|x| x["chunk_id"].as_str().map(str::to_string)).collect())
                        .unwrap_or_default()
                }
                Err(crate::knowledge::ToolError::Ledger(e)) => return Err(e.into()),
                Err(e) => {
                    self.dossier.system_errors.push(e.to_string());
                    self.escalate(EscalationCause::ToolFailure, &e.to_string())?;
                    return Ok(None);
                }
            }
        } else {
            match retrieve_guidelines(&query, &self.ctx.store, k) {
                Ok(ranked) => {
                    let ids: Vec<String> = ranked.iter().map(|(c, _)| c.chunk_id.clone()).collect();
                    self.log(AuditEventKind::ToolCall, json!({ "op": "retrieve", "k": k, "results": ids }))?;
                    ids
                }
                Err(e) => {
                    self.dossier.system_errors.push(e.to_string());
                    self.escalate(EscalationCause::ToolFailure, &e.to_string())?;
                    return Ok(None);
                }
            }
        };
        let chunks: Vec<GuidelineChunk> = ids.iter().filter_map(|id| self.ctx.store.chunk(id).cloned()).collect();
        self.dossier.retrieved_chunks = ids;

        if let Some(zip) = self.dossier.submission.fields.get("zip").cloned() {
            if self.ctx.tools.contains("location_risk") {
                match self.ctx.tools.invoke(&self.ctx.ledger, &case_id, "location_risk", &json!({ "zip": zip })) {
                    Ok(r) => {
                        self.dossier.tool_results.insert(r.call_id, r.output_text);
                    }
                    Err(crate::knowledge::ToolError::Ledger(e)) => return Err(e.into()),
                    // A missing lookup is logged by the registry; analysis continues without it.
                    Err(_) => {}
                }
            }
        }
        Ok(Some(chunks))
    }

    /// Runs one pass with retries. Valid output is returned; otherwise the
    /// case has been escalated and `Stop` is returned.
    fn pass<T: Serialize>(
        &mut self,
        task: Task,
        mut call: impl FnMut(u32) -> Attempt<T>,
    ) -> Result<Pass<(T, u32, TokenUsage)>, EngineError> {
        let mut last_violation = String::new();
        for attempt in 0..self.ctx.config.max_attempts.max(1) {
            let a = call(attempt);
            match a.result {
                Ok(value) => {
                    self.dossier.passes.push(PassRecord {
                        task,
                        attempt,
                        usage: a.usage,
                        status: PassStatus::Valid,
                    });
                    return Ok(Pass::Ok((value, attempt, a.usage)));
                }
                Err(GatewayError::SchemaViolation(v)) => {
                    self.dossier.passes.push(PassRecord {
                        task,
                        attempt,
                        usage: a.usage,
                        status: PassStatus::SchemaViolation(v.to_string()),
                    });
                    self.dossier
                        .guard_outcomes
                        .push(GuardOutcome::new(GuardReason::SchemaInvalid, v.to_string()));
                    self.log(
                        AuditEventKind::AgentOutput,
                        json!({ "task": task, "attempt": attempt, "raw": a.raw, "usage": a.usage, "violation": v }),
                    )?;
                    last_violation = v.to_string();
                }
                Err(e) => {
                    let msg = e.to_string();
                    self.dossier.passes.push(PassRecord {
                        task,
                        attempt,
                        usage: a.usage,
                        status: PassStatus::BackendError(msg.clone()),
                    });
                    self.dossier.system_errors.push(msg.clone());
                    self.log(
                        AuditEventKind::AgentOutput,
                        json!({ "task": task, "attempt": attempt, "error": msg }),
                    )?;
                    self.escalate(EscalationCause::BackendUnavailable, &msg)?;
                    return Ok(Pass::Stop);
                }
            }
        }
        self.dossier
            .guard_outcomes
            .push(GuardOutcome::new(GuardReason::NonConvergent, last_violation.clone()));
        self.escalate(EscalationCause::NonConvergent, &last_violation)?;
        Ok(Pass::Stop)
    }

    fn run(mut self) -> Result<CaseDossier, EngineError> {
        self.ingest()?;
        let Some(chunks) = self.gather()? else {
            return Ok(self.dossier);
        };
        let case_id = self.case_id();
        let ctx = self.ctx;
        // Backends never see the scoring annotation.
        let submission = self.dossier.submission.redacted();

        let Pass::Ok((draft, attempt, usage)) =
            self.pass(Task::Draft, |a| generate_draft(&submission, &chunks, &ctx.gateway.agent, a))?
        else {
            return Ok(self.dossier);
        };
        let draft_id = format!("{case_id}/draft-1");
        self.step(
            WorkflowEvent::DraftProduced { draft_id: draft_id.clone() },
            AuditEventKind::AgentOutput,
            json!({ "task": Task::Draft, "attempt": attempt, "usage": usage, "draft_id": draft_id, "output": draft }),
        )?;
        self.dossier.drafts.push(StoredDraft {
            draft_id,
            task: Task::Draft,
            draft: draft.clone(),
        });

        match &ctx.gateway.critic {
            None => {
                self.step(
                    WorkflowEvent::CritiqueSkipped,
                    AuditEventKind::CritiqueIssued,
                    json!({ "skipped": true, "reason": "agent_only" }),
                )?;
            }
            Some(critic) => {
                let Pass::Ok((report, attempt, usage)) =
                    self.pass(Task::Critique, |a| generate_critique(&draft, &submission, &chunks, critic, a))?
                else {
                    return Ok(self.dossier);
                };
                let critique_id = format!("{case_id}/critique-1");
                let event = if report.verdict == Verdict::Clean {
                    WorkflowEvent::CriticClean { critique_id: critique_id.clone() }
                } else {
                    WorkflowEvent::CriticFlagsFound { critique_id: critique_id.clone() }
                };
                self.step(
                    event,
                    AuditEventKind::CritiqueIssued,
                    json!({ "attempt": attempt, "usage": usage, "critique_id": critique_id, "report": report }),
                )?;
                self.dossier.critiques.push(StoredCritique {
                    critique_id,
                    report: report.clone(),
                });

                if report.verdict == Verdict::IssuesFound {
                    let Pass::Ok((revised, attempt, usage)) = self.pass(Task::Revise, |a| {
                        revise_draft(&draft, &report, &submission, &chunks, &ctx.gateway.agent, a)
                    })?
                    else {
                        return Ok(self.dossier);
                    };
                    let draft_id = format!("{case_id}/draft-2");
                    self.step(
                        WorkflowEvent::RevisionProduced { draft_id: draft_id.clone() },
                        AuditEventKind::Revision,
                        json!({ "attempt": attempt, "usage": usage, "draft_id": draft_id, "output": revised }),
                    )?;
                    self.dossier.unresolved_flags = revised
                        .flag_resolutions
                        .iter()
                        .filter(|r| r.status != ResolutionStatus::Addressed)
                        .map(|r| crate::agent::gateway::carried_flag_text(r.flag_index, &report.flags[r.flag_index]))
                        .collect();
                    self.dossier.drafts.push(StoredDraft {
                        draft_id,
                        task: Task::Revise,
                        draft: revised,
                    });
                }
            }
        }

        let final_draft = self.dossier.latest_draft().expect("a draft exists at decision").clone();
        let (outcome, boundary) =
            evaluate_guards(&self.dossier.submission.line_of_business, &final_draft, &ctx.config.guards);
        self.dossier.guard_outcomes.push(outcome.clone());
        if outcome.passed {
            self.step(
                WorkflowEvent::RecommendationFinalized,
                AuditEventKind::GuardEvaluated,
                json!({ "outcome": outcome, "boundary": boundary }),
            )?;
        } else {
            self.log(AuditEventKind::GuardEvaluated, json!({ "outcome": outcome, "boundary": boundary }))?;
            self.escalate(EscalationCause::Guard(outcome.reason), &outcome.detail)?;
        }
        Ok(self.dossier)
    }
}

/// Drives a submission until it waits for a human (`AwaitingHumanAuth`) or
/// has been escalated. Never records an outcome.
pub fn run_case(submission: Submission, ctx: &PipelineContext) -> Result<CaseDossier, EngineError> {
    submission.validate()?;
    let dossier = CaseDossier::new(submission, ctx.mode(), ctx.ledger.now());
    Run { ctx, dossier }.run()
}

/// Persistence for dossiers.
pub trait CaseStore: Send + Sync {
    fn save(&self, dossier: &CaseDossier) -> io::Result<()>;
    fn load_all(&self) -> io::Result<Vec<CaseDossier>>;
}

#[derive(Debug, Default)]
pub struct MemoryCaseStore;

impl CaseStore for MemoryCaseStore {
    fn save(&self, _dossier: &CaseDossier) -> io::Result<()> {
        Ok(())
    }

    fn load_all(&self) -> io::Result<Vec<CaseDossier>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub answer: ChatAnswer,
    pub citations: Vec<ResolvedCitation>,
}

/// Shared case registry. Each case has its own lock; every mutation of a
/// case happens while holding it.
pub struct Engine {
    ctx: PipelineContext,
    store: Arc<dyn CaseStore>,
    cases: RwLock<BTreeMap<String, Arc<Mutex<CaseDossier>>>>,
}

fn lock(m: &Mutex<CaseDossier>) -> std::sync::MutexGuard<'_, CaseDossier> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Engine {
    pub fn new(ctx: PipelineContext, store: Arc<dyn CaseStore>) -> Result<Self, EngineError> {
        let mut cases = BTreeMap::new();
        for d in store.load_all()? {
            cases.insert(d.case.case_id.clone(), Arc::new(Mutex::new(d)));
        }
        Ok(Self {
            ctx,
            store,
            cases: RwLock::new(cases),
        })
    }

    pub fn context(&self) -> &PipelineContext {
        &self.ctx
    }

    pub fn ledger(&self) -> &Arc<AuditLedger> {
        &self.ctx.ledger
    }

    fn handle(&self, case_id: &str) -> Result<Arc<Mutex<CaseDossier>>, EngineError> {
        self.cases
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(case_id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownCase(case_id.to_string()))
    }

    /// Registers the case and returns its id without running the pipeline.
    /// The caller then runs [`Engine::process`], possibly on another worker.
    pub fn accept(&self, submission: Submission) -> Result<String, EngineError> {
        submission.validate()?;
        let id = submission.submission_id.clone();
        let mut cases = self.cases.write().unwrap_or_else(|p| p.into_inner());
        if cases.contains_key(&id) {
            return Err(EngineError::DuplicateCase(id));
        }
        let dossier = CaseDossier::new(submission, self.ctx.mode(), self.ctx.ledger.now());
        cases.insert(id.clone(), Arc::new(Mutex::new(dossier)));
        Ok(id)
    }

    /// Runs the pipeline for an accepted case still in `Ingest`.
    pub fn process(&self, case_id: &str) -> Result<CaseDossier, EngineError> {
        let handle = self.handle(case_id)?;
        let mut guard = lock(&handle);
        if guard.case.state != CaseState::Ingest || !guard.case.transition_log.is_empty() {
            return Ok(guard.clone());
        }
        let submission = guard.submission.clone();
        let submitted_at = guard.submitted_at;
        let mut done = run_case(submission, &self.ctx)?;
        done.submitted_at = submitted_at;
        self.store.save(&done)?;
        *guard = done.clone();
        Ok(done)
    }

    pub fn submit(&self, submission: Submission) -> Result<CaseDossier, EngineError> {
        let id = self.accept(submission)?;
        self.process(&id)
    }

    pub fn get(&self, case_id: &str) -> Option<CaseDossier> {
        self.handle(case_id).ok().map(|h| lock(&h).clone())
    }

    /// All cases ordered by submission time.
    pub fn list(&self) -> Vec<CaseDossier> {
        let handles: Vec<_> = self
            .cases
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .cloned()
            .collect();
        let mut all: Vec<CaseDossier> = handles.iter().map(|h| lock(h).clone()).collect();
        all.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then_with(|| a.case_id().cmp(b.case_id())));
        all
    }

    /// Human decision through the authority gate. Retrying the identical
    /// decision with the same token returns the recorded outcome without a
    /// second `Recorded` event.
    pub fn authorize(
        &self,
        case_id: &str,
        decision: &HumanDecision,
        token: &ConcurrencyToken,
    ) -> Result<Authorization, EngineError> {
        let handle = self.handle(case_id)?;
        let mut dossier = lock(&handle);
        if let (Some(outcome), Some(prev), Some(prev_token)) =
            (&dossier.outcome, &dossier.decision, &dossier.decision_token)
        {
            if prev.same_request(decision) && prev_token == token {
                return Ok(Authorization {
                    case: dossier.case.clone(),
                    outcome: Some(outcome.clone()),
                    records: Vec::new(),
                });
            }
        }
        let auth = governance::authorize(&dossier.case, dossier.latest_draft(), decision, token, &self.ctx.ledger)?;
        dossier.case = auth.case.clone();
        if let Some(outcome) = &auth.outcome {
            dossier.outcome = Some(outcome.clone());
            let mut stamped = decision.clone();
            stamped.timestamp = Some(outcome.recorded_at);
            dossier.decision = Some(stamped);
            dossier.decision_token = Some(token.clone());
        } else {
            dossier.escalation.get_or_insert(EscalationCause::Guard(GuardReason::Clean));
        }
        self.store.save(&dossier)?;
        Ok(auth)
    }

    pub fn resolve_escalation(
        &self,
        case_id: &str,
        reviewer_id: &str,
        action: ResolutionAction,
        notes: &str,
        token: &ConcurrencyToken,
    ) -> Result<CaseDossier, EngineError> {
        let handle = self.handle(case_id)?;
        let mut dossier = lock(&handle);
        let (case, _) = governance::resolve_escalation(&dossier.case, reviewer_id, action, notes, token, &self.ctx.ledger)?;
        dossier.case = case;
        self.store.save(&dossier)?;
        Ok(dossier.clone())
    }

    /// Reviewer question about a case. Logged as agent output; the case
    /// itself is untouched.
    pub fn chat(&self, case_id: &str, question: &str) -> Result<ChatReply, EngineError> {
        let handle = self.handle(case_id)?;
        let dossier = lock(&handle).clone();
        let chunks: Vec<GuidelineChunk> = dossier
            .retrieved_chunks
            .iter()
            .filter_map(|id| self.ctx.store.chunk(id).cloned())
            .collect();
        let attempt = answer_question(
            question,
            dossier.latest_draft(),
            &dossier.submission,
            &chunks,
            &self.ctx.gateway.agent,
        );
        let answer = match attempt.result {
            Ok(a) => a,
            Err(e) => {
                self.ctx.ledger.append(
                    case_id,
                    AuditEventKind::AgentOutput,
                    json!({ "task": Task::Chat, "question": question, "error": e.to_string() }),
                )?;
                return Err(EngineError::Chat(e));
            }
        };
        let resolver = dossier.resolver(&self.ctx.store);
        let citations: Vec<ResolvedCitation> = answer.citations.iter().map(|c| resolver.annotate(c)).collect();
        self.ctx.ledger.append(
            case_id,
            AuditEventKind::AgentOutput,
            json!({ "task": Task::Chat, "question": question, "answer": answer, "usage": attempt.usage, "citations": citations }),
        )?;
        Ok(ChatReply { answer, citations })
    }
}
