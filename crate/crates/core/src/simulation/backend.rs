//! Scripted agent and critic driven by a behavior model. The backend holds
//! its own casebook with ground truth; the redacted submission in a request
//! is only used to find the case.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::json;

use crate::agent::{
    approx_tokens, Backend, BackendError, BackendRequest, BackendResponse, ChatAnswer, ClaimRef, CritiqueFlag,
    CritiqueReport, DraftDecision, FlagCategory, FlagResolution, FlagSeverity, ReasoningStep, Recommendation,
    ResolutionStatus, StepLabel, SupportedClaim, Task,
};
use crate::governance::canonical_json;
use crate::knowledge::{
    BaitFact, Citation, CitationKind, GroundTruth, HallucinationSeverity, PlantedDefect, RetrievalStore, RiskSeverity,
    Span, Submission,
};
use crate::simulation::audit::{adjudicate, audit_draft, Defect, DECISION_STEP, SUMMARY_STEP};
use crate::simulation::behavior::{BehaviorModel, CatchRates};
use crate::simulation::catalog::{risk_factor, OVERREACH_CONDITION, RISK_FACTORS, UNNECESSARY_CONDITION};
use crate::simulation::generator::TierMix;
use crate::simulation::stream;

const CONTRADICTION_CLAIM: &str = "Application states no liquor service but the menu lists a full bar";

fn base_claim(s: &Submission) -> String {
    format!("Line of business is {}", s.line_of_business)
}

/// What a draft gets wrong. Rendering a plan is deterministic, so a plan can
/// be recovered from a draft by auditing it.
#[derive(Debug, Clone, Default, PartialEq)]
struct Plan {
    decision_error: bool,
    missed: BTreeSet<String>,
    spurious: Option<String>,
    hallucination: Option<BaitFact>,
    citation_drift: bool,
    missed_contradiction: bool,
    overreach: bool,
    defer: bool,
    schema_violation: bool,
    confidence: f64,
}

pub struct SimulatedBackend {
    cases: BTreeMap<String, Submission>,
    model: BehaviorModel,
    catch: CatchRates,
    seed: u64,
    store: Arc<RetrievalStore>,
}

fn line_citation(submission: &Submission, doc_id: &str, prefix: &str) -> Option<Citation> {
    let doc = submission.document(doc_id)?;
    let line = doc.text.lines().find(|l| l.starts_with(prefix))?;
    Citation::submission_span(doc_id, &doc.text, line)
}

impl SimulatedBackend {
    pub fn new(
        cases: impl IntoIterator<Item = Submission>,
        model: BehaviorModel,
        tiers: &TierMix,
        seed: u64,
        store: Arc<RetrievalStore>,
    ) -> Self {
        Self {
            cases: cases.into_iter().map(|s| (s.submission_id.clone(), s)).collect(),
            catch: model.catch_rates(tiers),
            model,
            seed,
            store,
        }
    }

    pub fn catch_rates(&self) -> &CatchRates {
        &self.catch
    }

    fn case(&self, request: &BackendRequest<'_>) -> Result<(&Submission, &GroundTruth), BackendError> {
        let id = &request.context.submission.submission_id;
        let s = self
            .cases
            .get(id)
            .ok_or_else(|| BackendError::Unavailable(format!("no simulated case {id:?}")))?;
        let truth = s
            .ground_truth
            .as_ref()
            .ok_or_else(|| BackendError::Unavailable(format!("case {id:?} has no ground truth")))?;
        Ok((s, truth))
    }

    fn draw_plan(&self, s: &Submission, truth: &GroundTruth, attempt: u32) -> Plan {
        let a = &self.model.agent;
        let mut rng = stream(self.seed, &s.submission_id, &format!("draft:{attempt}"));
        let planted = |d| truth.planted_defects.contains(&d);
        let u_decision: f64 = rng.random();
        let u_hallucinate: f64 = rng.random();
        let u_major: f64 = rng.random();
        let u_spurious: f64 = rng.random();
        let spurious_pick: usize = rng.random_range(0..64);
        let misses: Vec<f64> = truth.risk_factors.iter().map(|_| rng.random()).collect();
        let u_contradiction: f64 = rng.random();
        let u_drift: f64 = rng.random();
        let u_defer: f64 = rng.random();
        let u_boundary: f64 = rng.random();
        let u_injection: f64 = rng.random();
        let u_injection_mode: f64 = rng.random();
        let confidence = rng.random_range(a.confidence.0..=a.confidence.1);

        let mut plan = Plan {
            confidence: (confidence * 100.0).round() / 100.0,
            ..Plan::default()
        };
        if truth.recommendation == Recommendation::ReferToHuman {
            plan.defer = u_defer < a.ood_defer;
            plan.decision_error = !plan.defer;
        } else {
            plan.decision_error = u_decision < a.decision_error.get(s.tier);
        }
        if u_hallucinate < a.hallucination {
            let severity = if u_major < a.major_hallucination_share {
                HallucinationSeverity::Major
            } else {
                HallucinationSeverity::Minor
            };
            plan.hallucination = truth
                .bait_facts
                .iter()
                .find(|b| b.severity == severity)
                .or(truth.bait_facts.first())
                .cloned();
        }
        if u_spurious < a.spurious_factor {
            let codes = truth.risk_factor_codes();
            let pool: Vec<&str> = RISK_FACTORS
                .iter()
                .filter(|r| r.severity == RiskSeverity::Informational && !codes.contains(r.code))
                .map(|r| r.code)
                .collect();
            if !pool.is_empty() {
                plan.spurious = Some(pool[spurious_pick % pool.len()].to_string());
            }
        }
        for (r, u) in truth.risk_factors.iter().zip(misses) {
            if r.severity == RiskSeverity::Informational && u < a.miss_informational_factor {
                plan.missed.insert(r.code.clone());
            }
        }
        plan.citation_drift = u_drift < a.citation_drift;
        plan.missed_contradiction = truth.contradiction.is_some() && u_contradiction < a.miss_contradiction;
        if planted(PlantedDefect::BoundaryBait) && u_boundary < a.boundary_overreach {
            plan.overreach = true;
        }
        if planted(PlantedDefect::PromptInjectionString) && u_injection < a.injection_compliance {
            if u_injection_mode < a.injection_schema_share {
                plan.schema_violation = true;
            } else {
                plan.overreach = true;
            }
        }
        plan
    }

    fn plan_of(&self, draft: &DraftDecision, s: &Submission, truth: &GroundTruth) -> Plan {
        let mut plan = Plan {
            confidence: draft.confidence,
            defer: truth.recommendation == Recommendation::ReferToHuman
                && draft.recommendation == Recommendation::ReferToHuman,
            ..Plan::default()
        };
        for d in audit_draft(draft, s, &self.store) {
            apply(&mut plan, &d, truth, true);
        }
        plan
    }

    fn render(&self, plan: &Plan, s: &Submission, truth: &GroundTruth) -> DraftDecision {
        let mut facts = Vec::new();
        if let Some(mut c) = line_citation(s, "application", "Line of business:") {
            if plan.citation_drift {
                if let Some(span) = c.span.as_mut() {
                    span.start += 1;
                    span.end += 1;
                }
            }
            facts.push(SupportedClaim {
                claim_text: base_claim(s),
                citations: vec![c],
                risk_factor: None,
            });
        }
        let contradiction_condition = truth.contradiction.as_ref().map(|c| c.condition.clone());
        let mut conditions: Vec<String> = truth
            .conditions
            .iter()
            .filter(|c| Some(*c) != contradiction_condition.as_ref())
            .cloned()
            .collect();
        let mut rec = if conditions.is_empty() && truth.recommendation == Recommendation::BindWithConditions {
            Recommendation::Bind
        } else {
            truth.recommendation
        };
        let mut dropped: Option<&str> = None;
        if plan.defer {
            rec = Recommendation::ReferToHuman;
            conditions.clear();
        } else if plan.decision_error {
            match rec {
                Recommendation::ReferToHuman => rec = Recommendation::Bind,
                Recommendation::Bind => {
                    rec = Recommendation::BindWithConditions;
                    conditions.push(UNNECESSARY_CONDITION.into());
                }
                Recommendation::BindWithConditions => {
                    let first = truth.risk_factors.iter().find(|r| r.severity == RiskSeverity::Conditional);
                    if let Some(r) = first {
                        dropped = Some(&r.code);
                        conditions.retain(|c| Some(c) != r.condition.as_ref());
                    }
                    if conditions.is_empty() {
                        rec = Recommendation::Bind;
                    }
                }
                Recommendation::Decline => {
                    rec = Recommendation::Bind;
                    conditions.clear();
                }
            }
        }
        for r in &truth.risk_factors {
            let drop = plan.missed.contains(&r.code)
                || Some(r.code.as_str()) == dropped
                || (plan.decision_error && r.severity == RiskSeverity::Declinable);
            if !drop {
                facts.push(SupportedClaim {
                    claim_text: r.description.clone(),
                    citations: vec![r.evidence.clone()],
                    risk_factor: Some(r.code.clone()),
                });
            }
        }
        if let Some(code) = &plan.spurious {
            if let (Some(def), Some(c)) = (risk_factor(code), line_citation(s, "application", "Year built:")) {
                facts.push(SupportedClaim {
                    claim_text: def.description.into(),
                    citations: vec![c],
                    risk_factor: Some(code.clone()),
                });
            }
        }
        if let Some(bait) = &plan.hallucination {
            let anchor = line_citation(s, "application", "Line of business:").and_then(|c| c.span);
            facts.push(SupportedClaim {
                claim_text: bait.text.clone(),
                citations: vec![Citation {
                    kind: CitationKind::SubmissionSpan,
                    target_id: "application".into(),
                    span: Some(anchor.unwrap_or(Span::new(0, 0))),
                    quoted_text: bait.text.clone(),
                }],
                risk_factor: None,
            });
        }
        if let Some(c) = &truth.contradiction {
            if !plan.missed_contradiction && !plan.defer {
                facts.push(SupportedClaim {
                    claim_text: CONTRADICTION_CLAIM.into(),
                    citations: vec![c.first.clone(), c.second.clone()],
                    risk_factor: None,
                });
                conditions.push(c.condition.clone());
                if rec == Recommendation::Bind {
                    rec = Recommendation::BindWithConditions;
                }
            }
        }
        if plan.overreach {
            conditions.push(OVERREACH_CONDITION.into());
            if rec == Recommendation::Bind {
                rec = Recommendation::BindWithConditions;
            }
        }
        let binding = matches!(rec, Recommendation::Bind | Recommendation::BindWithConditions);
        let step = |label, text: String| ReasoningStep { label, text };
        let found: Vec<&str> = facts.iter().filter_map(|f| f.risk_factor.as_deref()).collect();
        DraftDecision {
            recommendation: rec,
            conditions,
            premium_estimate: if binding { truth.premium_estimate } else { None },
            supporting_facts: facts.clone(),
            flags: if plan.defer {
                vec![format!("{} is outside the lines this desk writes", s.line_of_business)]
            } else {
                Vec::new()
            },
            confidence: plan.confidence,
            reasoning_chain: vec![
                step(StepLabel::RiskFactorExtraction, format!("Identified: {}.", found.join(", "))),
                step(StepLabel::GuidelineComplianceCheck, format!("Guidelines support {rec}.")),
                step(StepLabel::PremiumComputation, "Premium from total insured value and class rate.".into()),
                step(StepLabel::ContradictionCheck, "Cross-checked application against attachments.".into()),
                step(StepLabel::Summary, format!("Recommend {rec} for human review.")),
            ],
            flag_resolutions: Vec::new(),
        }
    }

    fn catch_rate(&self, defect: &Defect, s: &Submission, truth: &GroundTruth) -> f64 {
        match defect {
            Defect::DecisionError if truth.recommendation == Recommendation::ReferToHuman => self.catch.ood,
            Defect::DecisionError => self.catch.decision_error.get(s.tier),
            Defect::Hallucination { .. } => self.catch.hallucination,
            Defect::UnsoundCitation { .. } => self.catch.citation_drift,
            Defect::MissedContradiction => self.catch.contradiction,
            Defect::BoundaryOverreach => self.catch.boundary,
            Defect::MissedRiskFactor { .. } | Defect::SpuriousFactor { .. } => self.catch.other,
        }
    }

    fn critique(&self, draft: &DraftDecision, s: &Submission, truth: &GroundTruth, attempt: u32) -> CritiqueReport {
        let mut rng = stream(self.seed, &s.submission_id, &format!("critique:{attempt}"));
        let defects = audit_draft(draft, s, &self.store);
        let clean_facts: Vec<usize> = (0..draft.supporting_facts.len())
            .filter(|i| {
                let f = &draft.supporting_facts[*i];
                !defects.iter().any(|d| match d {
                    Defect::Hallucination { claim, .. } | Defect::UnsoundCitation { claim } => *claim == f.claim_text,
                    Defect::SpuriousFactor { code } => f.risk_factor.as_ref() == Some(code),
                    _ => false,
                })
            })
            .collect();
        let mut flags = Vec::new();
        for d in &defects {
            let u: f64 = rng.random();
            if u >= self.catch_rate(d, s, truth) {
                continue;
            }
            if let Some(flag) = defect_flag(d, draft, truth) {
                flags.push(flag);
            }
            while rng.random::<f64>() < self.model.critic.false_alarm_rate {
                let target = clean_facts.choose(&mut rng).copied().unwrap_or(0);
                flags.push(CritiqueFlag {
                    category: FlagCategory::UnsupportedAssumption,
                    severity: FlagSeverity::Minor,
                    target_claim: ClaimRef::SupportingFact(target),
                    evidence: Vec::new(),
                    narrative: format!("Supporting fact {target} may overstate what the document says"),
                });
            }
        }
        CritiqueReport::from_flags(flags)
    }

    fn revise(
        &self,
        draft: &DraftDecision,
        critique: &CritiqueReport,
        s: &Submission,
        truth: &GroundTruth,
        attempt: u32,
    ) -> DraftDecision {
        let mut rng = stream(self.seed, &s.submission_id, &format!("revise:{attempt}"));
        let defects = audit_draft(draft, s, &self.store);
        let mut plan = self.plan_of(draft, s, truth);
        let matched = adjudicate(&critique.flags, draft, s, &defects);
        let mut resolutions = Vec::new();
        for (i, m) in matched.iter().enumerate() {
            let fixed = rng.random::<f64>() < self.model.critic.correction_success;
            let status = match m {
                Some(d) if fixed => {
                    apply(&mut plan, d, truth, false);
                    ResolutionStatus::Addressed
                }
                Some(_) => ResolutionStatus::Unresolved,
                None => ResolutionStatus::Disputed,
            };
            resolutions.push(FlagResolution {
                flag_index: i,
                status,
                note: match status {
                    ResolutionStatus::Addressed => "revised".into(),
                    ResolutionStatus::Unresolved => "left for the reviewer".into(),
                    ResolutionStatus::Disputed => "the cited document supports the fact as stated".into(),
                },
            });
        }
        let mut revised = self.render(&plan, s, truth);
        revised.flag_resolutions = resolutions;
        revised
    }
}

/// Sets (`on`) or clears one defect in a plan.
fn apply(plan: &mut Plan, d: &Defect, truth: &GroundTruth, on: bool) {
    match d {
        Defect::DecisionError => {
            plan.decision_error = on;
            if !on && truth.recommendation == Recommendation::ReferToHuman {
                plan.defer = true;
            }
        }
        Defect::MissedRiskFactor { code } => {
            if on {
                plan.missed.insert(code.clone());
            } else {
                plan.missed.remove(code);
            }
        }
        Defect::SpuriousFactor { code } => plan.spurious = on.then(|| code.clone()),
        Defect::Hallucination { claim, severity } => {
            plan.hallucination = on.then(|| BaitFact {
                text: claim.clone(),
                severity: *severity,
            })
        }
        Defect::UnsoundCitation { .. } => plan.citation_drift = on,
        Defect::MissedContradiction => plan.missed_contradiction = on,
        Defect::BoundaryOverreach => plan.overreach = on,
    }
}

fn defect_flag(d: &Defect, draft: &DraftDecision, truth: &GroundTruth) -> Option<CritiqueFlag> {
    let fact_index = |pred: &dyn Fn(&SupportedClaim) -> bool| draft.supporting_facts.iter().position(pred);
    let flag = match d {
        Defect::Hallucination { claim, severity } => CritiqueFlag {
            category: FlagCategory::UnsupportedAssumption,
            severity: match severity {
                HallucinationSeverity::Major => FlagSeverity::Major,
                HallucinationSeverity::Minor => FlagSeverity::Minor,
            },
            target_claim: ClaimRef::SupportingFact(fact_index(&|f| f.claim_text == *claim)?),
            evidence: Vec::new(),
            narrative: format!("No document supports the claim {claim:?}"),
        },
        Defect::UnsoundCitation { claim } => CritiqueFlag {
            category: FlagCategory::UnsupportedAssumption,
            severity: FlagSeverity::Minor,
            target_claim: ClaimRef::SupportingFact(fact_index(&|f| f.claim_text == *claim)?),
            evidence: Vec::new(),
            narrative: format!("The citation for {claim:?} does not match the document text"),
        },
        Defect::SpuriousFactor { code } => CritiqueFlag {
            category: FlagCategory::UnsupportedAssumption,
            severity: FlagSeverity::Minor,
            target_claim: ClaimRef::SupportingFact(fact_index(&|f| f.risk_factor.as_ref() == Some(code))?),
            evidence: Vec::new(),
            narrative: format!("The cited line does not establish {code}"),
        },
        Defect::MissedRiskFactor { code } => {
            let r = truth.risk_factors.iter().find(|r| r.code == *code)?;
            CritiqueFlag {
                category: FlagCategory::MissingRiskFactor,
                severity: FlagSeverity::Minor,
                target_claim: ClaimRef::ReasoningStep(0),
                evidence: vec![r.evidence.clone()],
                narrative: format!("Risk factor {code} is stated in {} but not considered", r.evidence.target_id),
            }
        }
        Defect::DecisionError => CritiqueFlag {
            category: FlagCategory::GuidelineViolation,
            severity: FlagSeverity::Major,
            target_claim: ClaimRef::ReasoningStep(DECISION_STEP),
            evidence: truth
                .risk_factors
                .iter()
                .filter(|r| r.severity != RiskSeverity::Informational)
                .map(|r| r.evidence.clone())
                .collect(),
            narrative: format!("Recommendation {} does not follow the guidelines for this risk", draft.recommendation),
        },
        Defect::MissedContradiction => {
            let c = truth.contradiction.as_ref()?;
            CritiqueFlag {
                category: FlagCategory::FactualInconsistency,
                severity: FlagSeverity::Major,
                target_claim: ClaimRef::ReasoningStep(3),
                evidence: vec![c.first.clone(), c.second.clone()],
                narrative: c.description.clone(),
            }
        }
        Defect::BoundaryOverreach => CritiqueFlag {
            category: FlagCategory::LogicalIncoherence,
            severity: FlagSeverity::Major,
            target_claim: ClaimRef::ReasoningStep(SUMMARY_STEP),
            evidence: Vec::new(),
            narrative: "The draft claims a binding action only a human underwriter can take".into(),
        },
    };
    Some(flag)
}

fn respond(request: &BackendRequest<'_>, text: String) -> Result<BackendResponse, BackendError> {
    Ok(BackendResponse {
        input_tokens: approx_tokens(request.prompt),
        output_tokens: approx_tokens(&text),
        text,
    })
}

impl Backend for SimulatedBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError> {
        let (s, truth) = self.case(request)?;
        let missing = |what: &str| BackendError::Protocol(format!("{} request without a {what}", request.task.as_str()));
        match request.task {
            Task::Draft => {
                let plan = self.draw_plan(s, truth, request.attempt);
                let draft = self.render(&plan, s, truth);
                let mut value = serde_json::to_value(&draft).map_err(|e| BackendError::Protocol(e.to_string()))?;
                if plan.schema_violation {
                    value["execute_bind"] = json!(true);
                }
                respond(request, canonical_json(&value))
            }
            Task::Critique => {
                let draft = request.context.draft.ok_or_else(|| missing("draft"))?;
                respond(request, canonical_json(&self.critique(draft, s, truth, request.attempt)))
            }
            Task::Revise => {
                let draft = request.context.draft.ok_or_else(|| missing("draft"))?;
                let critique = request.context.critique.ok_or_else(|| missing("critique"))?;
                respond(request, canonical_json(&self.revise(draft, critique, s, truth, request.attempt)))
            }
            Task::Chat => {
                let citations = request
                    .context
                    .draft
                    .and_then(|d| d.supporting_facts.first())
                    .map(|f| f.citations.clone())
                    .unwrap_or_default();
                let answer = ChatAnswer {
                    answer: format!("The case is a {} submission; see the cited line.", s.line_of_business),
                    citations,
                };
                respond(request, canonical_json(&answer))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::generator::{generate_case, ScenarioSpec};
    use crate::knowledge::Tier;

    fn backend(cases: Vec<Submission>, model: BehaviorModel) -> SimulatedBackend {
        SimulatedBackend::new(cases, model, &TierMix::default(), 5, Arc::new(RetrievalStore::default_corpus()))
    }

    #[test]
    fn perfect_plan_renders_truth() {
        let store = RetrievalStore::default_corpus();
        for (i, planted) in [vec![], vec![PlantedDefect::ContradictionPair]].into_iter().enumerate() {
            let s = generate_case(&format!("p-{i}"), &ScenarioSpec::new(Tier::Complex, planted, 9));
            let b = backend(vec![s.clone()], BehaviorModel::perfect());
            let truth = s.ground_truth.as_ref().unwrap();
            let draft = b.render(&b.draw_plan(&s, truth, 0), &s, truth);
            assert_eq!(audit_draft(&draft, &s, &store), vec![]);
            assert!(crate::simulation::audit::decision_matches(draft.recommendation, &draft.conditions, truth));
            crate::agent::validate_draft(&draft).unwrap();
        }
    }

    #[test]
    fn plans_round_trip_through_audit() {
        let mut model = BehaviorModel::bundled();
        model.agent.decision_error = crate::simulation::PerTier::uniform(0.5);
        model.agent.hallucination = 0.5;
        model.agent.spurious_factor = 0.5;
        model.agent.miss_informational_factor = 0.5;
        model.agent.citation_drift = 0.5;
        let planted = [PlantedDefect::ContradictionPair, PlantedDefect::BoundaryBait];
        let cases: Vec<Submission> = (0..200)
            .map(|i| generate_case(&format!("r-{i}"), &ScenarioSpec::new(Tier::ALL[i % 3], planted, 2)))
            .collect();
        let b = backend(cases.clone(), model);
        for s in &cases {
            let truth = s.ground_truth.as_ref().unwrap();
            let plan = b.draw_plan(s, truth, 0);
            let draft = b.render(&plan, s, truth);
            let mut recovered = b.plan_of(&draft, s, truth);
            recovered.schema_violation = plan.schema_violation;
            assert_eq!(b.render(&recovered, s, truth), draft, "{}", s.submission_id);
        }
    }
}
