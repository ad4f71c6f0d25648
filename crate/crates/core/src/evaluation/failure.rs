//! Assigns one failure mode to each evaluated case.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::Recommendation;
use crate::evaluation::metrics::{CaseOutcomeRecord, Hallucination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    #[serde(rename = "FM1_MissedEdgeCase")]
    MissedEdgeCase,
    #[serde(rename = "FM2_OverConservative")]
    OverConservative,
    #[serde(rename = "FM3_MinorHallucination")]
    MinorHallucination,
    #[serde(rename = "FM4_CriticFalseAlarm")]
    CriticFalseAlarm,
    #[serde(rename = "FM5_SystemIntegration")]
    SystemIntegration,
    NoFailure,
}

impl FailureMode {
    pub fn code(self) -> &'static str {
        match self {
            FailureMode::MissedEdgeCase => "FM1",
            FailureMode::OverConservative => "FM2",
            FailureMode::MinorHallucination => "FM3",
            FailureMode::CriticFalseAlarm => "FM4",
            FailureMode::SystemIntegration => "FM5",
            FailureMode::NoFailure => "none",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Order in which rules are tried; the first that applies labels the case.
pub const FAILURE_PRIORITY: [FailureMode; 5] = [
    FailureMode::SystemIntegration,
    FailureMode::MissedEdgeCase,
    FailureMode::OverConservative,
    FailureMode::MinorHallucination,
    FailureMode::CriticFalseAlarm,
];

/// Restrictiveness rank used to tell too-permissive from too-strict outcomes.
fn strictness(r: Recommendation) -> u8 {
    match r {
        Recommendation::Bind => 0,
        Recommendation::BindWithConditions => 1,
        Recommendation::ReferToHuman => 2,
        Recommendation::Decline => 3,
    }
}

fn applies(mode: FailureMode, r: &CaseOutcomeRecord) -> bool {
    match mode {
        FailureMode::SystemIntegration => r.system_error,
        FailureMode::MissedEdgeCase => {
            r.missing_factors() > 0
                || r.conditions_missing > 0
                || strictness(r.recommendation) < strictness(r.truth_recommendation)
        }
        FailureMode::OverConservative => {
            r.conditions_extra > 0 || strictness(r.recommendation) > strictness(r.truth_recommendation)
        }
        FailureMode::MinorHallucination => r.hallucination == Hallucination::Minor && r.decision_correct,
        FailureMode::CriticFalseAlarm => r.critic_flags.iter().any(|f| !f.is_true_issue),
        FailureMode::NoFailure => true,
    }
}

pub fn classify_failure(record: &CaseOutcomeRecord) -> FailureMode {
    FAILURE_PRIORITY
        .into_iter()
        .find(|m| applies(*m, record))
        .unwrap_or(FailureMode::NoFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics::tests::record;
    use crate::evaluation::metrics::{CriticFlagOutcome, System};

    fn base() -> CaseOutcomeRecord {
        record("c", System::AgentCritic)
    }

    fn false_alarm() -> CriticFlagOutcome {
        CriticFlagOutcome {
            flag: "missing_risk_factor".into(),
            is_true_issue: false,
            led_to_revision: false,
            corrected: false,
        }
    }

    #[test]
    fn correct_record_has_no_failure() {
        assert_eq!(classify_failure(&base()), FailureMode::NoFailure);
    }

    #[test]
    fn missed_daycare_exposure_is_an_edge_case() {
        let mut r = base();
        r.risk_factors_truth.insert("daycare_on_premises".into());
        assert_eq!(classify_failure(&r), FailureMode::MissedEdgeCase);
    }

    #[test]
    fn lone_false_alarm() {
        let mut r = base();
        r.critic_flags.push(false_alarm());
        assert_eq!(classify_failure(&r), FailureMode::CriticFalseAlarm);
    }

    #[test]
    fn priority_order_breaks_ties() {
        let mut r = base();
        r.critic_flags.push(false_alarm());
        r.hallucination = Hallucination::Minor;
        assert_eq!(classify_failure(&r), FailureMode::MinorHallucination);
        r.conditions_extra = 1;
        assert_eq!(classify_failure(&r), FailureMode::OverConservative);
        r.risk_factors_truth.insert("vacancy".into());
        assert_eq!(classify_failure(&r), FailureMode::MissedEdgeCase);
        r.system_error = true;
        assert_eq!(classify_failure(&r), FailureMode::SystemIntegration);
    }

    #[test]
    fn unnecessary_decline_is_over_conservative() {
        let mut r = base();
        r.recommendation = Recommendation::Decline;
        r.decision_correct = false;
        assert_eq!(classify_failure(&r), FailureMode::OverConservative);
    }

    #[test]
    fn labels_serialise_with_codes() {
        assert_eq!(
            serde_json::to_string(&FailureMode::MissedEdgeCase).unwrap(),
            "\"FM1_MissedEdgeCase\""
        );
    }
}
