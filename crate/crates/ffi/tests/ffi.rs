use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use underwrite_core::agent::{Scenario, Task};
use underwrite_core::evaluation::{fisher_exact, mcnemar_exact, wilson_interval};
use underwrite_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = uw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn stats_match_the_core_kernel() {
    let (mut lo, mut hi, mut p) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(uw_wilson_interval(480, 500, 1.96, &mut lo, &mut hi), UwStatus::Ok);
        assert_eq!((lo, hi), wilson_interval(480, 500, 1.96).unwrap());
        assert_eq!(uw_fisher_exact(7, 18, 0, 25, &mut p), UwStatus::Ok);
        assert_eq!(p, fisher_exact([[7, 18], [0, 25]]));
        assert_eq!(uw_mcnemar_exact(3, 14, &mut p), UwStatus::Ok);
        assert_eq!(p, mcnemar_exact(3, 14));
        assert_eq!(uw_wilson_interval(5, 0, 1.96, &mut lo, &mut hi), UwStatus::InvalidArgument);
        assert!(last_error().contains("n must be at least 1"));
        assert_eq!(uw_fisher_exact(0, 0, 0, 0, &mut p), UwStatus::InvalidArgument);
        assert_eq!(uw_mcnemar_exact(1, 1, ptr::null_mut()), UwStatus::NullArgument);
        assert_eq!(uw_wilson_interval(1, 2, 1.96, &mut lo, &mut hi), UwStatus::Ok);
        assert!(uw_last_error().is_null());
    }
}

#[test]
fn ledger_handle_appends_verifies_and_refuses_reserved_kinds() {
    unsafe {
        let mut ledger = ptr::null_mut();
        assert_eq!(uw_ledger_in_memory(&mut ledger), UwStatus::Ok);
        let mut seq = 0;
        let (case, kind, payload) = (c("case-1"), c("agent_output"), c("{\"task\":\"draft\"}"));
        assert_eq!(uw_ledger_append(ledger, case.as_ptr(), kind.as_ptr(), payload.as_ptr(), &mut seq), UwStatus::Ok);
        assert_eq!(seq, 1);
        for reserved in ["recorded", "human_decision"] {
            let k = c(reserved);
            assert_eq!(
                uw_ledger_append(ledger, case.as_ptr(), k.as_ptr(), payload.as_ptr(), &mut seq),
                UwStatus::ReservedKind
            );
        }
        let bogus = c("launch_missiles");
        assert_eq!(
            uw_ledger_append(ledger, case.as_ptr(), bogus.as_ptr(), payload.as_ptr(), &mut seq),
            UwStatus::InvalidArgument
        );
        let bad_json = c("{not json");
        assert_eq!(
            uw_ledger_append(ledger, case.as_ptr(), kind.as_ptr(), bad_json.as_ptr(), &mut seq),
            UwStatus::InvalidArgument
        );
        let mut len = 0;
        assert_eq!(uw_ledger_len(ledger, &mut len), UwStatus::Ok);
        assert_eq!(len, 1);
        let mut div = 0;
        assert_eq!(uw_ledger_verify(ledger, &mut div), UwStatus::Ok);
        assert_eq!(div, UW_NO_DIVERGENCE);
        uw_ledger_free(ledger);
        assert_eq!(uw_ledger_len(ptr::null(), &mut len), UwStatus::NullArgument);
    }
}

#[test]
fn file_ledgers_detect_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let cpath = c(path.to_str().unwrap());
    unsafe {
        let mut ledger = ptr::null_mut();
        assert_eq!(uw_ledger_open(cpath.as_ptr(), false, &mut ledger), UwStatus::Ok);
        let (case, kind) = (c("case-9"), c("tool_call"));
        for i in 0..5 {
            let payload = c(&format!("{{\"i\":{i}}}"));
            assert_eq!(uw_ledger_append(ledger, case.as_ptr(), kind.as_ptr(), payload.as_ptr(), ptr::null_mut()), UwStatus::Ok);
        }
        uw_ledger_free(ledger);

        let (mut checked, mut div) = (0, 0);
        assert_eq!(uw_verify_file(cpath.as_ptr(), &mut checked, &mut div), UwStatus::Ok);
        assert_eq!((checked, div), (5, UW_NO_DIVERGENCE));

        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("{\"i\":3}", "{\"i\":4}", 1);
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        assert_eq!(uw_verify_file(cpath.as_ptr(), &mut checked, &mut div), UwStatus::LedgerCorrupt);
        assert_eq!(div, 4);
        assert!(last_error().contains("seq 4"));
        let mut reopened = ptr::null_mut();
        assert_eq!(uw_ledger_open(cpath.as_ptr(), false, &mut reopened), UwStatus::LedgerCorrupt);
        assert!(reopened.is_null());
    }
}

#[test]
fn output_validation_reports_violations() {
    unsafe {
        let mut critique = true;
        let mut value = Scenario::bundled("clean-renewal").unwrap().responses[&Task::Draft][0].clone();
        let draft = c(&value.to_string());
        let status = uw_validate_output(draft.as_ptr(), &mut critique);
        assert_eq!(status, UwStatus::Ok, "{}", last_error());
        assert!(!critique);
        let report = c(r#"{"verdict":"clean","flags":[]}"#);
        assert_eq!(uw_validate_output(report.as_ptr(), &mut critique), UwStatus::Ok);
        assert!(critique);
        value["execute_bind"] = serde_json::json!(true);
        let binding = c(&value.to_string());
        assert_eq!(uw_validate_output(binding.as_ptr(), ptr::null_mut()), UwStatus::SchemaViolation);
        assert!(last_error().contains("execute_bind"));
        assert_eq!(uw_validate_output(ptr::null(), ptr::null_mut()), UwStatus::NullArgument);
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(uw_validate_output(bad.as_ptr().cast(), ptr::null_mut()), UwStatus::InvalidUtf8);
    }
}

fn staticlib() -> PathBuf {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    deps.parent().unwrap().join("libunderwrite_ffi.a")
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/underwrite.h")).unwrap();
    for symbol in [
        "uw_wilson_interval",
        "uw_fisher_exact",
        "uw_mcnemar_exact",
        "uw_validate_output",
        "uw_ledger_open",
        "uw_ledger_append",
        "uw_ledger_verify",
        "uw_ledger_free",
        "uw_verify_file",
        "uw_last_error",
        "typedef struct UwLedger UwLedger",
        "UW_STATUS_RESERVED_KIND = 6",
    ] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
    let lib = staticlib();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let build = Command::new("cc")
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).arg(dir.path().join("c.jsonl")).output().unwrap();
    let out = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{out}{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(out.trim(), "fisher=0.009625 reserved=6 records=2 clean=1");
}
