//! Summary reports as JSON and as plain-text tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evaluation::cost::{estimate_cost, Pricing};
use crate::evaluation::failure::{classify_failure, FailureMode};
use crate::evaluation::metrics::{
    compare, compute_by_system, stratified_report, CaseOutcomeRecord, Comparison, MetricsError, MetricsReport, Rate,
    StratifiedReport, System,
};
use crate::knowledge::Tier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub systems: BTreeMap<System, MetricsReport>,
    /// Agent-only against agent+critic, when both are present.
    pub comparison: Option<Comparison>,
    pub stratified: Option<StratifiedReport>,
    /// Agent+critic failure-mode counts.
    pub failure_modes: BTreeMap<FailureMode, u64>,
    /// Mean USD per case.
    pub mean_cost: BTreeMap<System, f64>,
}

pub fn evaluate(
    records: &[CaseOutcomeRecord],
    pricing: Pricing,
    stratify: bool,
) -> Result<EvaluationReport, MetricsError> {
    let systems = compute_by_system(records, None)?;
    let comparison = if systems.contains_key(&System::AgentOnly) && systems.contains_key(&System::AgentCritic) {
        Some(compare(records, System::AgentOnly, System::AgentCritic)?)
    } else {
        None
    };
    let stratified = if stratify { Some(stratified_report(records)?) } else { None };
    let mut failure_modes = BTreeMap::new();
    for r in records.iter().filter(|r| r.system == System::AgentCritic) {
        *failure_modes.entry(classify_failure(r)).or_insert(0) += 1;
    }
    let mut mean_cost = BTreeMap::new();
    for system in systems.keys() {
        let rs: Vec<&CaseOutcomeRecord> = records.iter().filter(|r| r.system == *system).collect();
        let total = rs.iter().fold(0.0, |acc, r| acc + estimate_cost(&r.passes, pricing));
        mean_cost.insert(*system, total / rs.len() as f64);
    }
    Ok(EvaluationReport {
        systems,
        comparison,
        stratified,
        failure_modes,
        mean_cost,
    })
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn rate_cell(rate: Option<&Rate>) -> String {
    match rate {
        Some(r) => format!("{} ({:.1}-{:.1})", pct(r.estimate), 100.0 * r.ci.0, 100.0 * r.ci.1),
        None => "N/A".into(),
    }
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

type RowGetter = fn(&MetricsReport) -> Option<&Rate>;

/// Rows of the summary table: label, accessor, paired test name, and
/// whether a manual baseline value is meaningful.
const SUMMARY_ROWS: [(&str, RowGetter, Option<&str>, bool); 11] = [
    ("Decision Accuracy", |m| m.decision_accuracy.as_ref(), Some("decision_accuracy"), true),
    ("Hallucination Rate", |m| m.hallucination_rate.as_ref(), Some("hallucination_free"), false),
    ("Evidence Completeness", |m| m.evidence_completeness.as_ref(), Some("evidence_completeness"), true),
    ("Contradiction Detection", |m| m.contradiction_detection.as_ref(), Some("contradiction_detection"), false),
    ("Source Traceability", |m| m.source_traceability.as_ref(), Some("source_traceability"), false),
    ("Guideline Compliance", |m| m.guideline_compliance.as_ref(), Some("guideline_compliance"), true),
    ("Risk Factor Recall", |m| m.risk_recall.as_ref(), None, true),
    ("Risk Factor Precision", |m| m.risk_precision.as_ref(), None, true),
    ("Critic Catch Rate", |m| m.catch_rate.as_ref(), None, false),
    ("False Positive Rate", |m| m.false_positive_rate.as_ref(), None, false),
    ("Correction Success Rate", |m| m.correction_success.as_ref(), None, false),
];

const COLUMNS: [System; 3] = [System::Manual, System::AgentOnly, System::AgentCritic];

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let _ = write!(s, "{:<w$}", c, w = widths[i]);
        }
        s.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// System comparison laid out as metric rows against system columns, with
/// McNemar p-values for agent-only against agent+critic.
pub fn render_summary_table(report: &EvaluationReport) -> String {
    let mut header = vec!["Metric".to_string()];
    header.extend(COLUMNS.iter().map(|s| s.label().to_string()));
    header.push("p-value".into());
    let mut rows = Vec::new();
    for (label, get, test, manual_meaningful) in SUMMARY_ROWS {
        let mut row = vec![label.to_string()];
        for system in COLUMNS {
            let cell = match report.systems.get(&system) {
                None => "-".into(),
                Some(_) if system == System::Manual && !manual_meaningful => "N/A".into(),
                Some(m) => rate_cell(get(m)),
            };
            row.push(cell);
        }
        let p = test
            .and_then(|t| report.comparison.as_ref()?.test(t))
            .filter(|t| t.b + t.c > 0)
            .map(|t| format_p(t.p_value))
            .unwrap_or_else(|| "N/A".into());
        row.push(p);
        rows.push(row);
    }
    let mut row = vec!["Boundary Violations".to_string()];
    for system in COLUMNS {
        row.push(
            report
                .systems
                .get(&system)
                .map(|m| format!("{} cases", m.boundary_violations))
                .unwrap_or_else(|| "-".into()),
        );
    }
    row.push("N/A".into());
    rows.push(row);
    let mut row = vec!["Mean Cost (USD)".to_string()];
    for system in COLUMNS {
        row.push(
            report
                .mean_cost
                .get(&system)
                .map(|c| format!("{c:.4}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    row.push("N/A".into());
    rows.push(row);
    let n = report.systems.values().map(|m| m.n_cases).max().unwrap_or(0);
    let mut out = table(&header, &rows);
    let _ = writeln!(out, "n={n}. Intervals are 95% Wilson score intervals. p-values from exact McNemar tests.");
    out
}

/// Decision accuracy by complexity tier.
pub fn render_stratified_table(report: &StratifiedReport) -> String {
    let mut header = vec!["Tier".to_string(), "n".to_string()];
    header.extend(COLUMNS.iter().map(|s| s.label().to_string()));
    let mut rows = Vec::new();
    for tier in Tier::ALL {
        let cells: Vec<_> = COLUMNS.iter().map(|s| report.cell(tier, *s)).collect();
        let Some(n) = cells.iter().flatten().map(|c| c.accuracy.n).max() else {
            continue;
        };
        let mut row = vec![tier.as_str().to_string(), n.to_string()];
        row.extend(cells.iter().map(|c| rate_cell(c.map(|c| &c.accuracy))));
        rows.push(row);
    }
    table(&header, &rows)
}

pub fn render_failure_modes(report: &EvaluationReport) -> String {
    let total: u64 = report.failure_modes.values().sum();
    let rows: Vec<Vec<String>> = report
        .failure_modes
        .iter()
        .map(|(m, c)| {
            vec![
                format!("{m:?}"),
                m.code().to_string(),
                c.to_string(),
                pct(*c as f64 / total.max(1) as f64),
            ]
        })
        .collect();
    table(&["Failure Mode".into(), "Code".into(), "Cases".into(), "Freq.".into()], &rows)
}
