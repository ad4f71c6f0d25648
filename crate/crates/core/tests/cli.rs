use std::path::Path;
use std::process::{Command, Output};

use underwrite_core::agent::Scenario;
use underwrite_core::evaluation::{fisher_exact, mcnemar_exact, wilson_interval, Z_95};

fn underwrite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_underwrite")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {line:?}"))
        .parse()
        .unwrap()
}

fn assert_one_line_error(o: &Output, code: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err:?}");
    assert!(err.starts_with(&format!("error: {code}: ")), "{err:?}");
}

#[test]
fn stats_fisher_prints_the_oracle_p() {
    let o = underwrite(&["stats", "fisher", "7", "18", "0", "25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = field(&stdout(&o), "p");
    assert!((p - fisher_exact([[7, 18], [0, 25]])).abs() < 5e-7);
    assert!((p - 0.00963).abs() < 1e-5, "{p}");
}

#[test]
fn stats_wilson_and_mcnemar_match_the_kernel() {
    let line = stdout(&underwrite(&["stats", "wilson", "480", "500"]));
    let (lo, hi) = wilson_interval(480, 500, Z_95).unwrap();
    assert!((field(&line, "lower") - lo).abs() < 1e-9);
    assert!((field(&line, "upper") - hi).abs() < 1e-9);
    let line = stdout(&underwrite(&["stats", "mcnemar", "3", "14"]));
    assert!((field(&line, "p") - mcnemar_exact(3, 14)).abs() < 5e-7);
}

#[test]
fn errors_are_one_machine_parseable_line() {
    assert_one_line_error(&underwrite(&["stats", "wilson", "5", "0"]), "domain");
    assert_one_line_error(&underwrite(&["stats", "fisher", "1", "2"]), "usage");
    assert_one_line_error(&underwrite(&["frobnicate"]), "usage");
    assert_one_line_error(&underwrite(&["evaluate", "/nonexistent/records.jsonl"]), "io");
    assert_one_line_error(&underwrite(&["audit", "verify", "/nonexistent/ledger.jsonl"]), "io");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "api_key = \"sk-1\"\n").unwrap();
    assert_one_line_error(&underwrite(&["ingest", "x.json", "--config", cfg.to_str().unwrap()]), "config");
    let help = underwrite(&["--help"]);
    assert!(help.status.success());
    assert!(stdout(&help).contains("simulate"));
}

fn mask(text: &str) -> String {
    text.chars().map(|c| if c.is_ascii_digit() { '#' } else { c }).collect()
}

#[test]
fn simulate_then_evaluate_reproduces_the_summary_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "n = 40\nseeds = [7]\n").unwrap();
    let records = dir.path().join("records.jsonl");
    let o = underwrite(&["simulate", "run", "--config", cfg.to_str().unwrap(), "--out", records.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), format!("wrote 120 records to {}", records.display()));
    let o = underwrite(&["evaluate", records.to_str().unwrap(), "--stratify", "tier"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/evaluate_tier.txt")).unwrap();
    assert_eq!(mask(&stdout(&o)), mask(&golden));

    let o = underwrite(&["evaluate", records.to_str().unwrap(), "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["systems"]["agent_critic"].is_object());
}

#[test]
fn ingest_then_audit_verify_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("service.toml");
    std::fs::write(&cfg, format!("data_dir = {:?}\ndurability = \"flush\"\n", dir.path().join("data"))).unwrap();
    let sub = dir.path().join("case-a.json");
    std::fs::write(&sub, serde_json::to_string(&Scenario::bundled("case-A-wiring").unwrap().submission).unwrap()).unwrap();

    let o = underwrite(&["ingest", sub.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(row["case_id"], "case-A-wiring");
    assert_eq!(row["state"], "awaiting_human_auth");

    let ledger = dir.path().join("data/ledger.jsonl");
    let o = underwrite(&["audit", "verify", ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok: "));

    let o = underwrite(&["audit", "export", "--case", "case-A-wiring", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle: underwrite_core::governance::AuditBundle = serde_json::from_slice(&o.stdout).unwrap();
    bundle.verify().unwrap();
    assert_one_line_error(
        &underwrite(&["audit", "export", "--case", "nope", "--ledger", ledger.to_str().unwrap()]),
        "unknown_case",
    );

    let mut bytes = std::fs::read(&ledger).unwrap();
    let at = bytes.len() / 2;
    bytes[at] ^= 0x01;
    std::fs::write(&ledger, &bytes).unwrap();
    assert_one_line_error(&underwrite(&["audit", "verify", ledger.to_str().unwrap()]), "ledger_corrupt");
}
