use std::fmt;

use serde::{Deserialize, Serialize};

use crate::knowledge::Citation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Bind,
    BindWithConditions,
    Decline,
    ReferToHuman,
}

impl Recommendation {
    pub fn as_str(self) -> &'static str {
        match self {
            Recommendation::Bind => "bind",
            Recommendation::BindWithConditions => "bind_with_conditions",
            Recommendation::Decline => "decline",
            Recommendation::ReferToHuman => "refer_to_human",
        }
    }
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLabel {
    RiskFactorExtraction,
    GuidelineComplianceCheck,
    PremiumComputation,
    ContradictionCheck,
    Summary,
}

impl StepLabel {
    /// Steps every draft's reasoning chain must contain.
    pub const REQUIRED: [StepLabel; 3] = [
        StepLabel::RiskFactorExtraction,
        StepLabel::GuidelineComplianceCheck,
        StepLabel::PremiumComputation,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasoningStep {
    pub label: StepLabel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportedClaim {
    pub claim_text: String,
    pub citations: Vec<Citation>,
    /// Risk-factor code from the shared vocabulary, when the claim establishes one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_factor: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionStatus {
    Addressed,
    /// Not fixed; the flag text is carried in `flags` for the reviewer.
    Unresolved,
    /// The agent contests the flag; also carried in `flags`.
    Disputed,
}

/// How a revision handled one flag of the critique it answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagResolution {
    pub flag_index: usize,
    pub status: ResolutionStatus,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraftDecision {
    pub recommendation: Recommendation,
    pub conditions: Vec<String>,
    pub premium_estimate: Option<f64>,
    pub supporting_facts: Vec<SupportedClaim>,
    pub flags: Vec<String>,
    pub confidence: f64,
    pub reasoning_chain: Vec<ReasoningStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flag_resolutions: Vec<FlagResolution>,
}

impl DraftDecision {
    /// A draft with the required reasoning steps and nothing else.
    pub fn minimal(recommendation: Recommendation, confidence: f64) -> Self {
        Self {
            recommendation,
            conditions: Vec::new(),
            premium_estimate: None,
            supporting_facts: Vec::new(),
            flags: Vec::new(),
            confidence,
            reasoning_chain: StepLabel::REQUIRED
                .iter()
                .map(|&label| ReasoningStep {
                    label,
                    text: String::new(),
                })
                .collect(),
            flag_resolutions: Vec::new(),
        }
    }

    pub fn risk_factors(&self) -> std::collections::BTreeSet<String> {
        self.supporting_facts
            .iter()
            .filter_map(|f| f.risk_factor.clone())
            .collect()
    }

    pub fn citations(&self) -> impl Iterator<Item = &Citation> {
        self.supporting_facts.iter().flat_map(|f| f.citations.iter())
    }

    pub fn resolves(&self, target: ClaimRef) -> bool {
        match target {
            ClaimRef::SupportingFact(i) => i < self.supporting_facts.len(),
            ClaimRef::ReasoningStep(i) => i < self.reasoning_chain.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimRef {
    SupportingFact(usize),
    ReasoningStep(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagCategory {
    FactualInconsistency,
    GuidelineViolation,
    UnsupportedAssumption,
    MissingRiskFactor,
    LogicalIncoherence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagSeverity {
    Minor,
    Major,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CritiqueFlag {
    pub category: FlagCategory,
    pub severity: FlagSeverity,
    pub target_claim: ClaimRef,
    pub evidence: Vec<Citation>,
    pub narrative: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    IssuesFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CritiqueReport {
    pub verdict: Verdict,
    pub flags: Vec<CritiqueFlag>,
}

impl CritiqueReport {
    pub fn clean() -> Self {
        Self {
            verdict: Verdict::Clean,
            flags: Vec::new(),
        }
    }

    pub fn from_flags(flags: Vec<CritiqueFlag>) -> Self {
        let verdict = if flags.is_empty() {
            Verdict::Clean
        } else {
            Verdict::IssuesFound
        };
        Self { verdict, flags }
    }
}

/// Reviewer chat reply. Citations are resolved before the reply is shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatAnswer {
    pub answer: String,
    #[serde(default)]
    pub citations: Vec<Citation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        Self {
            input_tokens,
            output_tokens,
        }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
    }
}
