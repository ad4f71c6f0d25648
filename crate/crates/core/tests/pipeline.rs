use std::sync::Arc;

use serde_json::json;
use underwrite_core::agent::{AgentGateway, FixtureBackend, Scenario, Task, Verdict};
use underwrite_core::clock::LogicalClock;
use underwrite_core::governance::{
    verify_chain, AuditBundle, AuthorizeError, AuditEventKind, AuditLedger, HumanAction, HumanDecision,
};
use underwrite_core::knowledge::fixture_registry;
use underwrite_core::knowledge::{CitationKind, RetrievalStore};
use underwrite_core::workflow::{
    run_case, CaseState, Engine, EngineError, EscalationCause, MemoryCaseStore, PassStatus, PipelineConfig, PipelineContext,
};
use underwrite_core::Recommendation;

fn context(with_critic: bool) -> PipelineContext {
    let ledger = Arc::new(AuditLedger::in_memory_with_clock(Arc::new(LogicalClock::new())));
    let store = Arc::new(RetrievalStore::default_corpus());
    let tools = Arc::new(fixture_registry(store.clone(), &ledger).unwrap());
    PipelineContext {
        gateway: AgentGateway::from_backend(Arc::new(FixtureBackend::bundled()), with_critic),
        tools,
        store,
        ledger,
        config: PipelineConfig::default(),
    }
}

fn scenario(id: &str) -> Scenario {
    Scenario::bundled(id).unwrap()
}

#[test]
fn case_a_revision_adds_the_electrical_condition() {
    let ctx = context(true);
    let d = run_case(scenario("case-A-wiring").submission, &ctx).unwrap();
    assert_eq!(d.case.state, CaseState::AwaitingHumanAuth);
    assert_eq!(d.case.critique_cycles_used, 1);
    assert_eq!(d.drafts.len(), 2);
    assert_eq!(d.critiques[0].report.verdict, Verdict::IssuesFound);
    let first = d.first_draft().unwrap();
    assert!(!first.conditions.iter().any(|c| c.contains("Electrical")));
    let last = d.latest_draft().unwrap();
    assert_eq!(last.recommendation, Recommendation::BindWithConditions);
    assert!(last.conditions.iter().any(|c| c == "Electrical system update within one year"));
    assert!(d.unresolved_flags.is_empty());
    assert!(d.tool_results.keys().any(|k| k.contains(":location_risk:")));
    assert!(verify_chain(&ctx.ledger).is_clean());
}

#[test]
fn case_b_cites_both_conflicting_spans() {
    let ctx = context(true);
    let d = run_case(scenario("case-B-liquor").submission, &ctx).unwrap();
    assert_eq!(d.case.state, CaseState::AwaitingHumanAuth);
    let last = d.latest_draft().unwrap();
    assert_eq!(last.recommendation, Recommendation::BindWithConditions);
    assert!(last.conditions.iter().any(|c| c.contains("contingent")));
    let docs: std::collections::BTreeSet<_> = last
        .citations()
        .filter(|c| c.kind == CitationKind::SubmissionSpan)
        .filter(|c| c.quoted_text.contains("Liquor service: none") || c.quoted_text.contains("Full bar"))
        .map(|c| c.target_id.clone())
        .collect();
    assert_eq!(docs.len(), 2, "{docs:?}");
}

#[test]
fn clean_renewal_skips_revision() {
    let ctx = context(true);
    let d = run_case(scenario("clean-renewal").submission, &ctx).unwrap();
    assert_eq!(d.case.state, CaseState::AwaitingHumanAuth);
    assert_eq!(d.case.critique_cycles_used, 0);
    assert_eq!(d.drafts.len(), 1);
}

#[test]
fn agent_only_mode_never_calls_the_critic() {
    let ctx = context(false);
    let d = run_case(scenario("case-A-wiring").submission, &ctx).unwrap();
    assert_eq!(d.case.state, CaseState::AwaitingHumanAuth);
    assert!(d.critiques.is_empty());
    assert!(d.passes.iter().all(|p| p.task == Task::Draft));
}

#[test]
fn repeated_schema_violations_escalate() {
    let ctx = context(true);
    let d = run_case(scenario("malformed-twice").submission, &ctx).unwrap();
    assert_eq!(d.case.state, CaseState::Escalated);
    assert_eq!(d.escalation, Some(EscalationCause::NonConvergent));
    assert_eq!(d.schema_failures(), 2);
    assert!(d.passes.iter().all(|p| matches!(p.status, PassStatus::SchemaViolation(_))));
    let kinds: Vec<_> = ctx.ledger.records_for(d.case_id()).iter().map(|r| r.event_kind).collect();
    assert!(!kinds.contains(&AuditEventKind::Recorded));
    assert_eq!(kinds.last(), Some(&AuditEventKind::Escalation));
}

#[test]
fn engine_authorizes_once_and_exports_a_verifying_bundle() {
    let ctx = context(true);
    let engine = Engine::new(ctx.clone(), Arc::new(MemoryCaseStore)).unwrap();
    let d = engine.submit(scenario("case-A-wiring").submission).unwrap();
    let token = d.token();
    let decision = HumanDecision::accept(d.case_id(), "uw-17");
    let auth = engine.authorize(d.case_id(), &decision, &token).unwrap();
    assert_eq!(auth.case.state, CaseState::Record);
    let outcome = auth.outcome.unwrap();
    assert_eq!(outcome.recommendation.recommendation, Recommendation::BindWithConditions);

    let again = engine.authorize(d.case_id(), &decision, &token).unwrap();
    assert_eq!(again.outcome.unwrap().outcome_id, outcome.outcome_id);
    let recorded = ctx
        .ledger
        .records_for(d.case_id())
        .iter()
        .filter(|r| r.event_kind == AuditEventKind::Recorded)
        .count();
    assert_eq!(recorded, 1);

    let bundle = AuditBundle::export(&ctx.ledger, d.case_id()).unwrap();
    bundle.verify().unwrap();
    assert!(bundle.ledger_verification.is_clean());
}

#[test]
fn stale_token_is_refused() {
    let ctx = context(true);
    let engine = Engine::new(ctx, Arc::new(MemoryCaseStore)).unwrap();
    let d = engine.submit(scenario("clean-renewal").submission).unwrap();
    let mut token = d.token();
    token.version -= 1;
    let err = engine
        .authorize(d.case_id(), &HumanDecision::accept(d.case_id(), "uw-1"), &token)
        .unwrap_err();
    assert!(
        matches!(err, EngineError::Authorize(AuthorizeError::StaleCase { presented: 3, current: 4 })),
        "{err}"
    );
}

#[test]
fn chat_is_logged_and_leaves_state_alone() {
    let ctx = context(true);
    let engine = Engine::new(ctx.clone(), Arc::new(MemoryCaseStore)).unwrap();
    let d = engine.submit(scenario("case-B-liquor").submission).unwrap();
    let before = engine.get(d.case_id()).unwrap();
    let reply = engine.chat(d.case_id(), "Why is binding contingent?").unwrap();
    assert!(!reply.answer.answer.is_empty());
    assert!(reply.citations.iter().all(|c| !c.hallucination_warning));
    assert_eq!(engine.get(d.case_id()).unwrap(), before);
    let last = ctx.ledger.records().last().unwrap().clone();
    assert_eq!(last.event_kind, AuditEventKind::AgentOutput);
    assert_eq!(last.payload["task"], json!("chat"));
}

#[test]
fn duplicate_submission_is_rejected() {
    let engine = Engine::new(context(true), Arc::new(MemoryCaseStore)).unwrap();
    engine.submit(scenario("clean-renewal").submission).unwrap();
    assert!(engine.submit(scenario("clean-renewal").submission).is_err());
}

#[test]
fn override_records_the_reviewer_recommendation() {
    let engine = Engine::new(context(true), Arc::new(MemoryCaseStore)).unwrap();
    let d = engine.submit(scenario("clean-renewal").submission).unwrap();
    let mut decision = HumanDecision::accept(d.case_id(), "uw-2");
    decision.action = HumanAction::Override;
    let mut rec = d.latest_draft().unwrap().clone();
    rec.recommendation = Recommendation::Decline;
    decision.final_recommendation = Some(rec);
    let auth = engine.authorize(d.case_id(), &decision, &d.token()).unwrap();
    let out = auth.outcome.unwrap();
    assert_eq!(out.recommendation.recommendation, Recommendation::Decline);
    assert_eq!(out.ai_recommendation.unwrap(), Recommendation::Bind);
}
