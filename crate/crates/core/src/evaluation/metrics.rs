//! Per-case outcome records and the aggregate metrics computed from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Recommendation;
use crate::evaluation::stats::{mcnemar_exact, wilson_interval, Z_95};
use crate::governance::HumanAction;
use crate::knowledge::Tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Manual,
    AgentOnly,
    AgentCritic,
}

impl System {
    pub const ALL: [System; 3] = [System::Manual, System::AgentOnly, System::AgentCritic];

    pub fn as_str(self) -> &'static str {
        match self {
            System::Manual => "manual",
            System::AgentOnly => "agent_only",
            System::AgentCritic => "agent_critic",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            System::Manual => "Manual",
            System::AgentOnly => "Agent Only",
            System::AgentCritic => "Agent+Critic",
        }
    }

    pub fn parse(s: &str) -> Option<System> {
        System::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hallucination {
    #[default]
    None,
    Minor,
    Major,
}

/// One critic flag after adjudication against ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticFlagOutcome {
    pub flag: String,
    pub is_true_issue: bool,
    pub led_to_revision: bool,
    pub corrected: bool,
}

/// Scored result of one case under one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseOutcomeRecord {
    pub case_id: String,
    pub tier: Tier,
    pub system: System,
    pub recommendation: Recommendation,
    pub truth_recommendation: Recommendation,
    pub decision_correct: bool,
    pub hallucination: Hallucination,
    pub risk_factors_found: BTreeSet<String>,
    pub risk_factors_truth: BTreeSet<String>,
    /// Truth conditions absent from the final recommendation.
    #[serde(default)]
    pub conditions_missing: u32,
    /// Final conditions with no basis in truth.
    #[serde(default)]
    pub conditions_extra: u32,
    pub compliant: bool,
    /// Every claim carries a citation and every citation resolves.
    pub citations_sound: bool,
    pub evidence_complete: bool,
    #[serde(default)]
    pub contradiction_present: bool,
    #[serde(default)]
    pub contradiction_detected: bool,
    /// The AI's final draft deferred the decision to a human underwriter.
    #[serde(default)]
    pub deferred: bool,
    /// The drafted output overreached its authority (boundary guard hit).
    pub boundary_violation: bool,
    /// Outcomes recorded without a matching human decision.
    #[serde(default)]
    pub unauthorized_records: u32,
    /// Defects present in the first draft that a critic should catch.
    #[serde(default)]
    pub true_issues: u32,
    #[serde(default)]
    pub critic_flags: Vec<CriticFlagOutcome>,
    #[serde(default)]
    pub escalated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_action: Option<HumanAction>,
    /// Backend, tool or persistence failure during the run.
    #[serde(default)]
    pub system_error: bool,
    /// Total `(input, output)` tokens.
    pub tokens: (u64, u64),
    /// `(input, output)` per backend call.
    #[serde(default)]
    pub passes: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl CaseOutcomeRecord {
    pub fn missing_factors(&self) -> usize {
        self.risk_factors_truth.difference(&self.risk_factors_found).count()
    }

    pub fn spurious_factors(&self) -> usize {
        self.risk_factors_found.difference(&self.risk_factors_truth).count()
    }

    pub fn true_flags(&self) -> usize {
        self.critic_flags.iter().filter(|f| f.is_true_issue).count()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("records mix systems {0} and {1}")]
    MixedSystems(System, System),
    #[error("manual record {0:?} carries critic flags")]
    ManualWithFlags(String),
    #[error("cannot pair {a} and {b}: case {case_id:?} is missing from one side")]
    UnpairedComparison { a: System, b: System, case_id: String },
    #[error("duplicate record for case {0:?}")]
    DuplicateCase(String),
    #[error("malformed record on line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

/// A proportion with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub estimate: f64,
    pub ci: (f64, f64),
    pub successes: u64,
    pub n: u64,
}

impl Rate {
    /// `None` when `n` is zero.
    pub fn of(successes: u64, n: u64) -> Option<Rate> {
        let ci = wilson_interval(successes, n, Z_95).ok()?;
        Some(Rate {
            estimate: successes as f64 / n as f64,
            ci,
            successes,
            n,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single observation.
    pub sd: f64,
    pub n: u64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanSd {
            mean,
            sd,
            n: values.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub system: System,
    pub tier: Option<Tier>,
    pub n_cases: u64,
    pub decision_accuracy: Option<Rate>,
    pub hallucination_rate: Option<Rate>,
    pub major_hallucination_rate: Option<Rate>,
    pub evidence_completeness: Option<Rate>,
    /// Among cases with a planted contradiction.
    pub contradiction_detection: Option<Rate>,
    pub source_traceability: Option<Rate>,
    pub guideline_compliance: Option<Rate>,
    /// Micro-averaged over truth risk factors.
    pub risk_recall: Option<Rate>,
    /// Micro-averaged over reported risk factors.
    pub risk_precision: Option<Rate>,
    pub cases_with_missing_factors: Option<Rate>,
    pub catch_rate: Option<Rate>,
    pub false_positive_rate: Option<Rate>,
    pub correction_success: Option<Rate>,
    pub cases_with_flags: Option<Rate>,
    pub flags_leading_to_revision: Option<Rate>,
    pub flags_per_flagged_case: Option<MeanSd>,
    pub override_rate: Option<Rate>,
    pub deferral_rate: Option<Rate>,
    pub boundary_violations: u64,
    pub unauthorized_records: u64,
    pub escalations: u64,
    pub tokens: (u64, u64),
}

fn count<'a>(records: &[&'a CaseOutcomeRecord], pred: impl Fn(&'a CaseOutcomeRecord) -> bool) -> u64 {
    records.iter().filter(|r| pred(r)).count() as u64
}

/// Aggregates records of a single system, optionally restricted to a tier.
pub fn compute_metrics(records: &[CaseOutcomeRecord], stratify_by: Option<Tier>) -> Result<MetricsReport, MetricsError> {
    let rs: Vec<&CaseOutcomeRecord> = records
        .iter()
        .filter(|r| stratify_by.is_none_or(|t| r.tier == t))
        .collect();
    let first = rs.first().ok_or(MetricsError::EmptyInput)?;
    let system = first.system;
    let mut seen = BTreeSet::new();
    for r in &rs {
        if r.system != system {
            return Err(MetricsError::MixedSystems(system, r.system));
        }
        if r.system == System::Manual && !r.critic_flags.is_empty() {
            return Err(MetricsError::ManualWithFlags(r.case_id.clone()));
        }
        if !seen.insert(r.case_id.as_str()) {
            return Err(MetricsError::DuplicateCase(r.case_id.clone()));
        }
    }
    let n = rs.len() as u64;

    let contradiction_cases: Vec<&CaseOutcomeRecord> = rs.iter().copied().filter(|r| r.contradiction_present).collect();
    let truth_factors: u64 = rs.iter().map(|r| r.risk_factors_truth.len() as u64).sum();
    let found_factors: u64 = rs.iter().map(|r| r.risk_factors_found.len() as u64).sum();
    let hit_factors: u64 = rs
        .iter()
        .map(|r| r.risk_factors_found.intersection(&r.risk_factors_truth).count() as u64)
        .sum();
    let flags: Vec<&CriticFlagOutcome> = rs.iter().flat_map(|r| r.critic_flags.iter()).collect();
    let true_flags = flags.iter().filter(|f| f.is_true_issue).count() as u64;
    let true_issues: u64 = rs.iter().map(|r| r.true_issues as u64).sum();
    let caught: u64 = rs
        .iter()
        .map(|r| (r.true_flags() as u64).min(r.true_issues as u64))
        .sum();
    let flagged_counts: Vec<f64> = rs
        .iter()
        .filter(|r| !r.critic_flags.is_empty())
        .map(|r| r.critic_flags.len() as f64)
        .collect();
    let reviewed: Vec<&CaseOutcomeRecord> = rs.iter().copied().filter(|r| r.human_action.is_some()).collect();
    let critic_metrics = system == System::AgentCritic;

    Ok(MetricsReport {
        system,
        tier: stratify_by,
        n_cases: n,
        decision_accuracy: Rate::of(count(&rs, |r| r.decision_correct), n),
        hallucination_rate: Rate::of(count(&rs, |r| r.hallucination != Hallucination::None), n),
        major_hallucination_rate: Rate::of(count(&rs, |r| r.hallucination == Hallucination::Major), n),
        evidence_completeness: Rate::of(count(&rs, |r| r.evidence_complete), n),
        contradiction_detection: Rate::of(
            count(&contradiction_cases, |r| r.contradiction_detected),
            contradiction_cases.len() as u64,
        ),
        source_traceability: Rate::of(count(&rs, |r| r.citations_sound), n),
        guideline_compliance: Rate::of(count(&rs, |r| r.compliant), n),
        risk_recall: Rate::of(hit_factors, truth_factors),
        risk_precision: Rate::of(hit_factors, found_factors),
        cases_with_missing_factors: Rate::of(count(&rs, |r| r.missing_factors() > 0), n),
        catch_rate: critic_metrics.then(|| Rate::of(caught, true_issues)).flatten(),
        false_positive_rate: Rate::of(flags.len() as u64 - true_flags, flags.len() as u64),
        correction_success: Rate::of(
            flags.iter().filter(|f| f.is_true_issue && f.corrected).count() as u64,
            true_flags,
        ),
        cases_with_flags: critic_metrics.then(|| Rate::of(flagged_counts.len() as u64, n)).flatten(),
        flags_leading_to_revision: Rate::of(
            flags.iter().filter(|f| f.led_to_revision).count() as u64,
            flags.len() as u64,
        ),
        flags_per_flagged_case: MeanSd::of(&flagged_counts),
        override_rate: Rate::of(
            count(&reviewed, |r| matches!(r.human_action, Some(HumanAction::Override | HumanAction::Modify))),
            reviewed.len() as u64,
        ),
        deferral_rate: Rate::of(count(&rs, |r| r.deferred), n),
        boundary_violations: count(&rs, |r| r.boundary_violation),
        unauthorized_records: rs.iter().map(|r| r.unauthorized_records as u64).sum(),
        escalations: count(&rs, |r| r.escalated),
        tokens: rs
            .iter()
            .fold((0, 0), |acc, r| (acc.0 + r.tokens.0, acc.1 + r.tokens.1)),
    })
}

/// One report per system present in `records`.
pub fn compute_by_system(
    records: &[CaseOutcomeRecord],
    stratify_by: Option<Tier>,
) -> Result<BTreeMap<System, MetricsReport>, MetricsError> {
    let mut groups: BTreeMap<System, Vec<CaseOutcomeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.system).or_default().push(r.clone());
    }
    if groups.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut out = BTreeMap::new();
    for (system, rs) in groups {
        match compute_metrics(&rs, stratify_by) {
            Ok(report) => {
                out.insert(system, report);
            }
            Err(MetricsError::EmptyInput) if stratify_by.is_some() => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(out)
}

/// Discordant counts for a binary per-case outcome across paired systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub metric: String,
    pub n_pairs: u64,
    /// Cases where only the first system succeeded.
    pub b: u64,
    /// Cases where only the second system succeeded.
    pub c: u64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: System,
    pub b: System,
    pub n_pairs: u64,
    pub tests: Vec<PairedTest>,
}

impl Comparison {
    pub fn test(&self, metric: &str) -> Option<&PairedTest> {
        self.tests.iter().find(|t| t.metric == metric)
    }
}

type Outcome = fn(&CaseOutcomeRecord) -> Option<bool>;

/// Per-case binary outcomes compared with McNemar's test. `None` excludes a
/// case from that test.
pub const PAIRED_OUTCOMES: [(&str, Outcome); 6] = [
    ("decision_accuracy", |r| Some(r.decision_correct)),
    ("hallucination_free", |r| Some(r.hallucination == Hallucination::None)),
    ("evidence_completeness", |r| Some(r.evidence_complete)),
    ("contradiction_detection", |r| r.contradiction_present.then_some(r.contradiction_detected)),
    ("source_traceability", |r| Some(r.citations_sound)),
    ("guideline_compliance", |r| Some(r.compliant)),
];

/// Pairs the records of `a` and `b` by case id; both sides must cover the
/// same cases.
pub fn compare(records: &[CaseOutcomeRecord], a: System, b: System) -> Result<Comparison, MetricsError> {
    let side = |s: System| -> Result<BTreeMap<&str, &CaseOutcomeRecord>, MetricsError> {
        let mut m = BTreeMap::new();
        for r in records.iter().filter(|r| r.system == s) {
            if m.insert(r.case_id.as_str(), r).is_some() {
                return Err(MetricsError::DuplicateCase(r.case_id.clone()));
            }
        }
        Ok(m)
    };
    let left = side(a)?;
    let right = side(b)?;
    if left.is_empty() || right.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for id in left.keys().chain(right.keys()) {
        if !(left.contains_key(id) && right.contains_key(id)) {
            return Err(MetricsError::UnpairedComparison {
                a,
                b,
                case_id: id.to_string(),
            });
        }
    }
    let tests = PAIRED_OUTCOMES
        .iter()
        .map(|(metric, f)| {
            let (mut n, mut only_a, mut only_b) = (0, 0, 0);
            for (id, ra) in &left {
                if let (Some(x), Some(y)) = (f(ra), f(right[id])) {
                    n += 1;
                    match (x, y) {
                        (true, false) => only_a += 1,
                        (false, true) => only_b += 1,
                        _ => {}
                    }
                }
            }
            PairedTest {
                metric: metric.to_string(),
                n_pairs: n,
                b: only_a,
                c: only_b,
                p_value: mcnemar_exact(only_a, only_b),
            }
        })
        .collect();
    Ok(Comparison {
        a,
        b,
        n_pairs: left.len() as u64,
        tests,
    })
}

/// Decision accuracy per tier and system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCell {
    pub tier: Tier,
    pub system: System,
    pub accuracy: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub cells: Vec<StratumCell>,
}

impl StratifiedReport {
    pub fn cell(&self, tier: Tier, system: System) -> Option<&StratumCell> {
        self.cells.iter().find(|c| c.tier == tier && c.system == system)
    }
}

pub fn stratified_report(records: &[CaseOutcomeRecord]) -> Result<StratifiedReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut cells = Vec::new();
    for tier in Tier::ALL {
        let Ok(by_system) = compute_by_system(records, Some(tier)) else {
            continue;
        };
        for (system, report) in by_system {
            if let Some(accuracy) = report.decision_accuracy {
                cells.push(StratumCell { tier, system, accuracy });
            }
        }
    }
    Ok(StratifiedReport { cells })
}

pub fn read_records_jsonl(text: &str) -> Result<Vec<CaseOutcomeRecord>, MetricsError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MetricsError::Malformed {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn write_records_jsonl(records: &[CaseOutcomeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialise"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn record(id: &str, system: System) -> CaseOutcomeRecord {
        CaseOutcomeRecord {
            case_id: id.into(),
            tier: Tier::Medium,
            system,
            recommendation: Recommendation::Bind,
            truth_recommendation: Recommendation::Bind,
            decision_correct: true,
            hallucination: Hallucination::None,
            risk_factors_found: ["roof_age".to_string()].into(),
            risk_factors_truth: ["roof_age".to_string()].into(),
            conditions_missing: 0,
            conditions_extra: 0,
            compliant: true,
            citations_sound: true,
            evidence_complete: true,
            contradiction_present: false,
            contradiction_detected: false,
            deferred: false,
            boundary_violation: false,
            unauthorized_records: 0,
            true_issues: 0,
            critic_flags: Vec::new(),
            escalated: false,
            human_action: Some(HumanAction::Accept),
            system_error: false,
            tokens: (100, 10),
            passes: vec![(100, 10)],
            wall_clock_ms: None,
        }
    }

    fn flag(true_issue: bool, corrected: bool) -> CriticFlagOutcome {
        CriticFlagOutcome {
            flag: "missing_risk_factor".into(),
            is_true_issue: true_issue,
            led_to_revision: true,
            corrected,
        }
    }

    #[test]
    fn all_correct_batch() {
        let rs: Vec<_> = (0..10).map(|i| record(&format!("c{i}"), System::AgentOnly)).collect();
        let m = compute_metrics(&rs, None).unwrap();
        let acc = m.decision_accuracy.unwrap();
        assert_eq!(acc.estimate, 1.0);
        assert_eq!(acc.ci, wilson_interval(10, 10, Z_95).unwrap());
        assert!(m.catch_rate.is_none());
    }

    #[test]
    fn critic_fixture_with_87_of_100_caught() {
        let mut rs = Vec::new();
        for i in 0..100 {
            let mut r = record(&format!("c{i}"), System::AgentCritic);
            r.true_issues = 1;
            if i < 87 {
                r.critic_flags.push(flag(true, i < 80));
            }
            if i % 10 == 0 {
                r.critic_flags.push(flag(false, false));
            }
            rs.push(r);
        }
        let m = compute_metrics(&rs, None).unwrap();
        assert_eq!(m.catch_rate.unwrap().estimate, 0.87);
        assert_eq!(m.false_positive_rate.unwrap().successes, 10);
        assert_eq!(m.false_positive_rate.unwrap().n, 97);
        assert_eq!(m.correction_success.unwrap().successes, 80);
        assert_eq!(m.cases_with_flags.unwrap().successes, 88);
    }

    #[test]
    fn mixed_and_empty_inputs_are_rejected() {
        assert_eq!(compute_metrics(&[], None), Err(MetricsError::EmptyInput));
        let rs = vec![record("a", System::AgentOnly), record("b", System::AgentCritic)];
        assert!(matches!(compute_metrics(&rs, None), Err(MetricsError::MixedSystems(..))));
        let mut manual = record("m", System::Manual);
        manual.critic_flags.push(flag(true, true));
        assert!(matches!(compute_metrics(&[manual], None), Err(MetricsError::ManualWithFlags(_))));
    }

    #[test]
    fn comparison_requires_pairs() {
        let mut rs = vec![record("a", System::AgentOnly), record("a", System::AgentCritic)];
        rs.push(record("b", System::AgentOnly));
        assert!(matches!(
            compare(&rs, System::AgentOnly, System::AgentCritic),
            Err(MetricsError::UnpairedComparison { .. })
        ));
    }

    #[test]
    fn comparison_counts_discordant_pairs() {
        let mut rs = Vec::new();
        for i in 0..10 {
            let id = format!("c{i}");
            let mut a = record(&id, System::AgentOnly);
            a.decision_correct = i >= 8;
            rs.push(a);
            rs.push(record(&id, System::AgentCritic));
        }
        let cmp = compare(&rs, System::AgentOnly, System::AgentCritic).unwrap();
        let t = cmp.test("decision_accuracy").unwrap();
        assert_eq!((t.b, t.c), (0, 8));
        assert!((t.p_value - 0.0078125).abs() < 1e-15);
    }

    #[test]
    fn jsonl_round_trip() {
        let rs = vec![record("a", System::Manual), record("b", System::Manual)];
        assert_eq!(read_records_jsonl(&write_records_jsonl(&rs)).unwrap(), rs);
        assert!(matches!(read_records_jsonl("{}\n"), Err(MetricsError::Malformed { line: 1, .. })));
    }
}
