//! Per-role error rates for the scripted agent and critic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::Tier;
use crate::simulation::generator::{tier_profile, TierMix};

const BUNDLED: &str = include_str!("../../fixtures/behavior_model.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerTier {
    pub simple: f64,
    pub medium: f64,
    pub complex: f64,
}

impl PerTier {
    pub fn uniform(p: f64) -> Self {
        Self {
            simple: p,
            medium: p,
            complex: p,
        }
    }

    pub fn get(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Simple => self.simple,
            Tier::Medium => self.medium,
            Tier::Complex => self.complex,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            simple: f(self.simple),
            medium: f(self.medium),
            complex: f(self.complex),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentModel {
    /// Probability the draft's decision or condition set is wrong.
    pub decision_error: PerTier,
    /// Probability the draft asserts a fact no document supports.
    pub hallucination: f64,
    /// Share of hallucinated facts that bear on the decision.
    pub major_hallucination_share: f64,
    /// Per informational factor.
    pub miss_informational_factor: f64,
    pub spurious_factor: f64,
    /// Probability a true fact is cited with a span that does not match.
    pub citation_drift: f64,
    pub miss_contradiction: f64,
    /// Out-of-appetite cases where the draft defers instead of binding.
    pub ood_defer: f64,
    /// Boundary-bait cases where the draft claims coverage is bound.
    pub boundary_overreach: f64,
    pub injection_compliance: f64,
    /// Share of complied injections that surface as a forbidden output field
    /// rather than binding language.
    pub injection_schema_share: f64,
    pub confidence: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticModel {
    /// Aggregate share of first-draft defects the critic flags.
    pub catch_rate: f64,
    /// Probability each flag is followed by another, spurious, flag.
    pub false_alarm_rate: f64,
    /// Probability the revision fixes a flagged defect.
    pub correction_success: f64,
    /// Decision error rate left after critique and revision.
    pub residual_decision_error: PerTier,
    pub residual_hallucination: f64,
    pub residual_citation_drift: f64,
    pub residual_missed_contradiction: f64,
    pub boundary_catch: f64,
    pub ood_catch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorModel {
    pub agent: AgentModel,
    pub critic: CriticModel,
}

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("{0} = {1} is not a probability")]
    NotProbability(&'static str, f64),
    #[error("confidence range {0:?} is not an ordered sub-range of [0, 1]")]
    ConfidenceRange((f64, f64)),
    #[error("behavior model does not parse: {0}")]
    Parse(String),
}

/// Per-defect catch probabilities implied by the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatchRates {
    pub hallucination: f64,
    pub citation_drift: f64,
    pub decision_error: PerTier,
    pub contradiction: f64,
    pub boundary: f64,
    pub ood: f64,
    /// Missed and spurious risk factors.
    pub other: f64,
}

/// Catch probability that takes a defect rate `p` to `residual` when a
/// caught defect is fixed with probability `fix`.
fn catch_for_residual(p: f64, residual: f64, fix: f64) -> f64 {
    if p <= 0.0 || fix <= 0.0 {
        return 0.0;
    }
    ((1.0 - residual / p) / fix).clamp(0.0, 1.0)
}

impl Default for BehaviorModel {
    fn default() -> Self {
        Self::bundled()
    }
}

impl BehaviorModel {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled behavior model is valid")
    }

    pub fn from_json(raw: &str) -> Result<Self, BehaviorError> {
        let model: Self = serde_json::from_str(raw).map_err(|e| BehaviorError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// A model with every error rate zero.
    pub fn perfect() -> Self {
        let mut m = Self::bundled();
        let a = &mut m.agent;
        a.decision_error = PerTier::uniform(0.0);
        a.hallucination = 0.0;
        a.miss_informational_factor = 0.0;
        a.spurious_factor = 0.0;
        a.citation_drift = 0.0;
        a.miss_contradiction = 0.0;
        a.ood_defer = 1.0;
        a.boundary_overreach = 0.0;
        a.injection_compliance = 0.0;
        m.critic.false_alarm_rate = 0.0;
        m.critic.residual_decision_error = PerTier::uniform(0.0);
        m.critic.residual_hallucination = 0.0;
        m.critic.residual_citation_drift = 0.0;
        m.critic.residual_missed_contradiction = 0.0;
        m
    }

    /// Sets per-tier decision accuracy for both configurations.
    pub fn with_tier_accuracy(mut self, agent_only: PerTier, agent_critic: PerTier) -> Self {
        self.agent.decision_error = agent_only.map(|a| 1.0 - a);
        self.critic.residual_decision_error = agent_critic.map(|a| 1.0 - a);
        self
    }

    pub fn validate(&self) -> Result<(), BehaviorError> {
        let a = &self.agent;
        let c = &self.critic;
        let checks = [
            ("agent.decision_error.simple", a.decision_error.simple),
            ("agent.decision_error.medium", a.decision_error.medium),
            ("agent.decision_error.complex", a.decision_error.complex),
            ("agent.hallucination", a.hallucination),
            ("agent.major_hallucination_share", a.major_hallucination_share),
            ("agent.miss_informational_factor", a.miss_informational_factor),
            ("agent.spurious_factor", a.spurious_factor),
            ("agent.citation_drift", a.citation_drift),
            ("agent.miss_contradiction", a.miss_contradiction),
            ("agent.ood_defer", a.ood_defer),
            ("agent.boundary_overreach", a.boundary_overreach),
            ("agent.injection_compliance", a.injection_compliance),
            ("agent.injection_schema_share", a.injection_schema_share),
            ("critic.catch_rate", c.catch_rate),
            ("critic.false_alarm_rate", c.false_alarm_rate),
            ("critic.correction_success", c.correction_success),
            ("critic.residual_decision_error.simple", c.residual_decision_error.simple),
            ("critic.residual_decision_error.medium", c.residual_decision_error.medium),
            ("critic.residual_decision_error.complex", c.residual_decision_error.complex),
            ("critic.residual_hallucination", c.residual_hallucination),
            ("critic.residual_citation_drift", c.residual_citation_drift),
            ("critic.residual_missed_contradiction", c.residual_missed_contradiction),
            ("critic.boundary_catch", c.boundary_catch),
            ("critic.ood_catch", c.ood_catch),
        ];
        for (name, p) in checks {
            if !(0.0..=1.0).contains(&p) {
                return Err(BehaviorError::NotProbability(name, p));
            }
        }
        if c.false_alarm_rate >= 1.0 {
            return Err(BehaviorError::NotProbability("critic.false_alarm_rate", c.false_alarm_rate));
        }
        let (lo, hi) = a.confidence;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(BehaviorError::ConfidenceRange(a.confidence));
        }
        Ok(())
    }

    /// Derives per-defect catch rates. Hallucination, citation, decision and
    /// contradiction rates reproduce their residual targets; the rate for
    /// risk-factor defects is solved so the expected aggregate catch over a
    /// case drawn from `tiers` equals `critic.catch_rate`.
    pub fn catch_rates(&self, tiers: &TierMix) -> CatchRates {
        let a = &self.agent;
        let c = &self.critic;
        let fix = c.correction_success;
        let hallucination = catch_for_residual(a.hallucination, c.residual_hallucination, fix);
        let citation_drift = catch_for_residual(a.citation_drift, c.residual_citation_drift, fix);
        let decision_error = PerTier {
            simple: catch_for_residual(a.decision_error.simple, c.residual_decision_error.simple, fix),
            medium: catch_for_residual(a.decision_error.medium, c.residual_decision_error.medium, fix),
            complex: catch_for_residual(a.decision_error.complex, c.residual_decision_error.complex, fix),
        };
        let total_weight: f64 = Tier::ALL.iter().map(|t| tiers.weight(*t).max(0.0)).sum();
        let mut issues = a.hallucination + a.citation_drift;
        let mut caught = a.hallucination * hallucination + a.citation_drift * citation_drift;
        let mut other = 0.0;
        for tier in Tier::ALL {
            let w = if total_weight > 0.0 { tiers.weight(tier).max(0.0) / total_weight } else { 0.0 };
            let p = tier_profile(tier);
            let informational = p.risk_factors as f64
                - p.p_bind_with_conditions * p.conditional_factors as f64
                - p.p_decline;
            let e = a.decision_error.get(tier);
            let o = informational * a.miss_informational_factor + a.spurious_factor;
            issues += w * (e + o);
            caught += w * e * decision_error.get(tier);
            other += w * o;
        }
        let other = if other > 0.0 {
            ((c.catch_rate * issues - caught) / other).clamp(0.0, 1.0)
        } else {
            0.0
        };
        CatchRates {
            hallucination,
            citation_drift,
            decision_error,
            contradiction: catch_for_residual(a.miss_contradiction, c.residual_missed_contradiction, fix),
            boundary: c.boundary_catch,
            ood: c.ood_catch,
            other,
        }
    }
}
