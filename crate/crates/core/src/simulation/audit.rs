//! Compares a draft against the ground truth of its case.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agent::{ClaimRef, CritiqueFlag, DraftDecision, FlagCategory, Recommendation};
use crate::governance::detect_boundary_violation;
use crate::knowledge::{
    GroundTruth, HallucinationSeverity, Resolver, RetrievalStore, RiskSeverity, Submission,
};
use crate::simulation::catalog::{OVERREACH_CONDITION};

/// A defect in a draft, keyed by content so it survives re-indexing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    DecisionError,
    MissedRiskFactor { code: String },
    SpuriousFactor { code: String },
    Hallucination { claim: String, severity: HallucinationSeverity },
    /// A supported claim whose citation does not resolve.
    UnsoundCitation { claim: String },
    MissedContradiction,
    BoundaryOverreach,
}

/// Recommendation and condition set with contradiction and overreach
/// conditions set aside; those are audited as their own defects.
fn core_decision(rec: Recommendation, conditions: &[String], truth: &GroundTruth) -> (Recommendation, BTreeSet<String>) {
    let contradiction = truth.contradiction.as_ref().map(|c| c.condition.as_str());
    let core: BTreeSet<String> = conditions
        .iter()
        .filter(|c| Some(c.as_str()) != contradiction && c.as_str() != OVERREACH_CONDITION)
        .cloned()
        .collect();
    let rec = if rec == Recommendation::BindWithConditions && core.is_empty() {
        Recommendation::Bind
    } else {
        rec
    };
    (rec, core)
}

/// Exact match of recommendation and condition set.
pub fn decision_matches(rec: Recommendation, conditions: &[String], truth: &GroundTruth) -> bool {
    let ours: BTreeSet<&String> = conditions.iter().collect();
    let theirs: BTreeSet<&String> = truth.conditions.iter().collect();
    rec == truth.recommendation && ours == theirs
}

/// No declinable factor bound, and every conditional factor's condition
/// present when binding.
pub fn compliant(rec: Recommendation, conditions: &[String], truth: &GroundTruth) -> bool {
    let binding = matches!(rec, Recommendation::Bind | Recommendation::BindWithConditions);
    if !binding {
        return true;
    }
    truth.risk_factors.iter().all(|r| match r.severity {
        RiskSeverity::Declinable => false,
        RiskSeverity::Conditional => r.condition.as_ref().is_none_or(|c| conditions.contains(c)),
        RiskSeverity::Informational => true,
    })
}

fn bait_severity(truth: &GroundTruth, claim: &str) -> Option<HallucinationSeverity> {
    truth.bait_facts.iter().find(|b| b.text == claim).map(|b| b.severity)
}

/// Every defect of `draft`, in a stable order.
pub fn audit_draft(draft: &DraftDecision, submission: &Submission, store: &RetrievalStore) -> Vec<Defect> {
    let Some(truth) = submission.ground_truth.as_ref() else {
        return Vec::new();
    };
    let resolver = Resolver::new(submission, store);
    let mut defects = BTreeSet::new();

    let expected = core_decision(truth.recommendation, &truth.conditions, truth);
    if core_decision(draft.recommendation, &draft.conditions, truth) != expected {
        defects.insert(Defect::DecisionError);
    }
    let found = draft.risk_factors();
    let truth_codes = truth.risk_factor_codes();
    for r in &truth.risk_factors {
        if r.severity == RiskSeverity::Informational && !found.contains(&r.code) {
            defects.insert(Defect::MissedRiskFactor { code: r.code.clone() });
        }
    }
    for code in found.difference(&truth_codes) {
        defects.insert(Defect::SpuriousFactor { code: code.clone() });
    }
    for fact in &draft.supporting_facts {
        let bait = bait_severity(truth, &fact.claim_text);
        let unresolved = fact.citations.iter().any(|c| resolver.resolve(c).is_err());
        match bait {
            Some(severity) => {
                defects.insert(Defect::Hallucination {
                    claim: fact.claim_text.clone(),
                    severity,
                });
            }
            None if unresolved => {
                defects.insert(Defect::UnsoundCitation {
                    claim: fact.claim_text.clone(),
                });
            }
            None => {}
        }
    }
    if let Some(c) = &truth.contradiction {
        let detected = draft
            .supporting_facts
            .iter()
            .any(|f| f.citations.contains(&c.first) && f.citations.contains(&c.second))
            && draft.conditions.contains(&c.condition);
        if !detected {
            defects.insert(Defect::MissedContradiction);
        }
    }
    if detect_boundary_violation(draft).violated() {
        defects.insert(Defect::BoundaryOverreach);
    }
    defects.into_iter().collect()
}

/// Index of the reasoning step a decision-error flag targets.
pub const DECISION_STEP: usize = 1;
/// Index of the reasoning step a boundary flag targets.
pub const SUMMARY_STEP: usize = 4;

/// The defect a flag identifies, if any. Each defect is claimed by at most
/// one flag; later duplicates count as false alarms.
pub fn adjudicate(flags: &[CritiqueFlag], draft: &DraftDecision, submission: &Submission, defects: &[Defect]) -> Vec<Option<Defect>> {
    let mut open: BTreeSet<&Defect> = defects.iter().collect();
    let truth = submission.ground_truth.as_ref();
    flags
        .iter()
        .map(|flag| {
            let candidate = match (flag.category, flag.target_claim) {
                (FlagCategory::UnsupportedAssumption, ClaimRef::SupportingFact(i)) => {
                    draft.supporting_facts.get(i).and_then(|fact| {
                        open.iter()
                            .find(|d| match d {
                                Defect::Hallucination { claim, .. } | Defect::UnsoundCitation { claim } => {
                                    *claim == fact.claim_text
                                }
                                Defect::SpuriousFactor { code } => fact.risk_factor.as_ref() == Some(code),
                                _ => false,
                            })
                            .map(|d| (*d).clone())
                    })
                }
                (FlagCategory::MissingRiskFactor, _) => truth.and_then(|t| {
                    t.risk_factors
                        .iter()
                        .find(|r| {
                            flag.evidence.contains(&r.evidence)
                                && open.contains(&Defect::MissedRiskFactor { code: r.code.clone() })
                        })
                        .map(|r| Defect::MissedRiskFactor { code: r.code.clone() })
                }),
                (FlagCategory::GuidelineViolation, ClaimRef::ReasoningStep(DECISION_STEP)) => {
                    Some(Defect::DecisionError)
                }
                (FlagCategory::LogicalIncoherence, ClaimRef::ReasoningStep(SUMMARY_STEP)) => {
                    Some(Defect::BoundaryOverreach)
                }
                (FlagCategory::FactualInconsistency, _) => Some(Defect::MissedContradiction),
                _ => None,
            };
            candidate.filter(|d| open.remove(d))
        })
        .collect()
}
