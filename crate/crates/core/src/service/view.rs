//! Reviewer-facing snapshots of a case. Every citation is resolved before
//! it leaves the server.

use serde::{Deserialize, Serialize};

use crate::agent::{ClaimRef, CritiqueFlag, FlagCategory, FlagResolution, FlagSeverity, ReasoningStep, Task, Verdict};
use crate::clock::Timestamp;
use crate::evaluation::{estimate_cost, Pricing};
use crate::governance::{ConcurrencyToken, HumanAction};
use crate::knowledge::{ResolvedCitation, Resolver, RetrievalStore, Tier};
use crate::workflow::{CaseDossier, CaseState, EscalationCause, GuardOutcome, PipelineMode, StoredDraft};
use crate::{DraftDecision, Recommendation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactView {
    pub claim_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_factor: Option<String>,
    pub citations: Vec<ResolvedCitation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftView {
    pub draft_id: String,
    pub task: Task,
    pub recommendation: Recommendation,
    pub conditions: Vec<String>,
    pub premium_estimate: Option<f64>,
    pub confidence: f64,
    pub flags: Vec<String>,
    pub supporting_facts: Vec<FactView>,
    pub reasoning_chain: Vec<ReasoningStep>,
    pub flag_resolutions: Vec<FlagResolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagView {
    pub category: FlagCategory,
    pub severity: FlagSeverity,
    pub target_claim: ClaimRef,
    pub narrative: String,
    pub evidence: Vec<ResolvedCitation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritiqueView {
    pub critique_id: String,
    pub verdict: Verdict,
    pub flags: Vec<FlagView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeView {
    pub outcome_id: String,
    pub action: HumanAction,
    pub reviewer_id: String,
    pub recommendation: DraftView,
    pub ai_recommendation: Option<Recommendation>,
    pub notes: String,
    pub recorded_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseView {
    pub case_id: String,
    pub state: CaseState,
    pub tier: Tier,
    pub line_of_business: String,
    pub mode: PipelineMode,
    pub submitted_at: Timestamp,
    pub critique_cycles_used: u8,
    /// The latest AI draft.
    pub recommendation: Option<DraftView>,
    /// Flags raised in the latest draft plus critique flags left unresolved.
    pub flags: Vec<String>,
    pub unresolved_flags: Vec<String>,
    /// Citations anywhere in the view that failed to resolve.
    pub hallucination_warnings: usize,
    pub drafts: Vec<DraftView>,
    pub critique_history: Vec<CritiqueView>,
    pub guard_outcomes: Vec<GuardOutcome>,
    pub escalation: Option<EscalationCause>,
    pub system_errors: Vec<String>,
    pub outcome: Option<OutcomeView>,
    pub estimated_cost_usd: f64,
    pub token: ConcurrencyToken,
}

/// One queue row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub state: CaseState,
    pub tier: Tier,
    pub line_of_business: String,
    pub submitted_at: Timestamp,
    pub recommendation: Option<Recommendation>,
    pub flag_count: usize,
    pub escalation: Option<EscalationCause>,
}

fn draft_view(draft_id: &str, task: Task, draft: &DraftDecision, resolver: &Resolver<'_>) -> DraftView {
    DraftView {
        draft_id: draft_id.to_string(),
        task,
        recommendation: draft.recommendation,
        conditions: draft.conditions.clone(),
        premium_estimate: draft.premium_estimate,
        confidence: draft.confidence,
        flags: draft.flags.clone(),
        supporting_facts: draft
            .supporting_facts
            .iter()
            .map(|f| FactView {
                claim_text: f.claim_text.clone(),
                risk_factor: f.risk_factor.clone(),
                citations: f.citations.iter().map(|c| resolver.annotate(c)).collect(),
            })
            .collect(),
        reasoning_chain: draft.reasoning_chain.clone(),
        flag_resolutions: draft.flag_resolutions.clone(),
    }
}

fn flag_view(flag: &CritiqueFlag, resolver: &Resolver<'_>) -> FlagView {
    FlagView {
        category: flag.category,
        severity: flag.severity,
        target_claim: flag.target_claim,
        narrative: flag.narrative.clone(),
        evidence: flag.evidence.iter().map(|c| resolver.annotate(c)).collect(),
    }
}

fn stored_view(d: &StoredDraft, resolver: &Resolver<'_>) -> DraftView {
    draft_view(&d.draft_id, d.task, &d.draft, resolver)
}

fn warnings(draft: &DraftView) -> usize {
    draft
        .supporting_facts
        .iter()
        .flat_map(|f| &f.citations)
        .filter(|c| c.hallucination_warning)
        .count()
}

impl CaseView {
    pub fn build(dossier: &CaseDossier, store: &RetrievalStore, pricing: Pricing) -> Self {
        let resolver = dossier.resolver(store);
        let drafts: Vec<DraftView> = dossier.drafts.iter().map(|d| stored_view(d, &resolver)).collect();
        let critique_history: Vec<CritiqueView> = dossier
            .critiques
            .iter()
            .map(|c| CritiqueView {
                critique_id: c.critique_id.clone(),
                verdict: c.report.verdict,
                flags: c.report.flags.iter().map(|f| flag_view(f, &resolver)).collect(),
            })
            .collect();
        let outcome = dossier.outcome.as_ref().map(|o| OutcomeView {
            outcome_id: o.outcome_id.clone(),
            action: o.action,
            reviewer_id: o.reviewer_id.clone(),
            recommendation: draft_view(&o.outcome_id, Task::Revise, &o.recommendation, &resolver),
            ai_recommendation: o.ai_recommendation,
            notes: o.notes.clone(),
            recorded_at: o.recorded_at,
        });
        let recommendation = drafts.last().cloned();
        let mut flags: Vec<String> = recommendation.as_ref().map(|d| d.flags.clone()).unwrap_or_default();
        for f in &dossier.unresolved_flags {
            if !flags.contains(f) {
                flags.push(f.clone());
            }
        }
        let hallucination_warnings = drafts.iter().map(warnings).sum::<usize>()
            + outcome.as_ref().map_or(0, |o| warnings(&o.recommendation))
            + critique_history
                .iter()
                .flat_map(|c| &c.flags)
                .flat_map(|f| &f.evidence)
                .filter(|c| c.hallucination_warning)
                .count();
        Self {
            case_id: dossier.case_id().to_string(),
            state: dossier.case.state,
            tier: dossier.submission.tier,
            line_of_business: dossier.submission.line_of_business.clone(),
            mode: dossier.mode,
            submitted_at: dossier.submitted_at,
            critique_cycles_used: dossier.case.critique_cycles_used,
            recommendation,
            flags,
            unresolved_flags: dossier.unresolved_flags.clone(),
            hallucination_warnings,
            drafts,
            critique_history,
            guard_outcomes: dossier.guard_outcomes.clone(),
            escalation: dossier.escalation,
            system_errors: dossier.system_errors.clone(),
            outcome,
            estimated_cost_usd: estimate_cost(&dossier.token_passes(), pricing),
            token: dossier.token(),
        }
    }
}

impl CaseSummary {
    pub fn of(dossier: &CaseDossier) -> Self {
        let latest = dossier.latest_draft();
        Self {
            case_id: dossier.case_id().to_string(),
            state: dossier.case.state,
            tier: dossier.submission.tier,
            line_of_business: dossier.submission.line_of_business.clone(),
            submitted_at: dossier.submitted_at,
            recommendation: latest.map(|d| d.recommendation),
            flag_count: latest.map_or(0, |d| d.flags.len()) + dossier.unresolved_flags.len(),
            escalation: dossier.escalation,
        }
    }
}
