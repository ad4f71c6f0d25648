//! Metrics, statistics, failure classification and cost estimation.

pub mod cost;
pub mod failure;
pub mod metrics;
pub mod report;
pub mod stats;

pub use cost::{estimate_cost, Pricing, TokenProfile};
pub use failure::{classify_failure, FailureMode, FAILURE_PRIORITY};
pub use metrics::{
    compare, compute_by_system, compute_metrics, read_records_jsonl, stratified_report, write_records_jsonl,
    CaseOutcomeRecord, Comparison, CriticFlagOutcome, Hallucination, MeanSd, MetricsError, MetricsReport, PairedTest,
    Rate, StratifiedReport, StratumCell, System,
};
pub use report::{evaluate, format_p, render_failure_modes, render_stratified_table, render_summary_table, EvaluationReport};
pub use stats::{
    fisher_exact, mcnemar_chi_squared, mcnemar_exact, mcnemar_test, wilson_interval, McNemarMethod, StatsError, Z_95,
};
