use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Recommendation;
use crate::knowledge::Citation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Simple,
    Medium,
    Complex,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Simple, Tier::Medium, Tier::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Medium => "medium",
            Tier::Complex => "complex",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One submission document. Spans into `text` are UTF-8 byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub doc_type: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub submission_id: String,
    pub line_of_business: String,
    pub tier: Tier,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    pub documents: Vec<Document>,
    /// Hidden scoring annotation. Never rendered into prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubmissionError {
    #[error("submission_id is empty")]
    MissingId,
    #[error("line_of_business is empty")]
    MissingLine,
    #[error("submission has no documents")]
    NoDocuments,
    #[error("document {0:?} has an empty id")]
    EmptyDocumentId(usize),
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
    #[error("malformed submission: {0}")]
    Malformed(String),
}

impl Submission {
    pub fn from_json(raw: &str) -> Result<Self, SubmissionError> {
        let submission: Submission =
            serde_json::from_str(raw).map_err(|e| SubmissionError::Malformed(e.to_string()))?;
        submission.validate()?;
        Ok(submission)
    }

    pub fn validate(&self) -> Result<(), SubmissionError> {
        if self.submission_id.trim().is_empty() {
            return Err(SubmissionError::MissingId);
        }
        if self.line_of_business.trim().is_empty() {
            return Err(SubmissionError::MissingLine);
        }
        if self.documents.is_empty() {
            return Err(SubmissionError::NoDocuments);
        }
        let mut seen = BTreeSet::new();
        for (i, doc) in self.documents.iter().enumerate() {
            if doc.doc_id.trim().is_empty() {
                return Err(SubmissionError::EmptyDocumentId(i));
            }
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(SubmissionError::DuplicateDocument(doc.doc_id.clone()));
            }
        }
        Ok(())
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Copy with the scoring annotation removed.
    pub fn redacted(&self) -> Submission {
        Submission {
            ground_truth: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedDefect {
    HallucinationBait,
    ContradictionPair,
    EdgeCaseGuideline,
    OutOfDistributionLine,
    PromptInjectionString,
    BoundaryBait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskSeverity {
    /// Rating information only.
    Informational,
    /// Requires a binding condition.
    Conditional,
    /// Outside guidelines: decline.
    Declinable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HallucinationSeverity {
    Minor,
    Major,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRiskFactor {
    pub code: String,
    pub description: String,
    pub severity: RiskSeverity,
    /// Where the factor is stated in the submission.
    pub evidence: Citation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guideline_chunk: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthContradiction {
    pub description: String,
    pub first: Citation,
    pub second: Citation,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaitFact {
    /// A plausible statement that no document supports.
    pub text: String,
    pub severity: HallucinationSeverity,
}

/// Reference outcome and planted-defect ledger for a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub recommendation: Recommendation,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default)]
    pub risk_factors: Vec<TruthRiskFactor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contradiction: Option<TruthContradiction>,
    #[serde(default)]
    pub planted_defects: BTreeSet<PlantedDefect>,
    #[serde(default)]
    pub bait_facts: Vec<BaitFact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premium_estimate: Option<f64>,
}

impl GroundTruth {
    pub fn risk_factor_codes(&self) -> BTreeSet<String> {
        self.risk_factors.iter().map(|r| r.code.clone()).collect()
    }
}
