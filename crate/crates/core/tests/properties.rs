use std::sync::Arc;

use proptest::prelude::*;
use serde_json::json;

use underwrite_core::clock::LogicalClock;
use underwrite_core::evaluation::{fisher_exact, mcnemar_exact, wilson_interval};
use underwrite_core::governance::{verify_bytes, AuditEventKind, AuditLedger};

fn ledger_of(notes: &[String]) -> AuditLedger {
    let ledger = AuditLedger::in_memory_with_clock(Arc::new(LogicalClock::new()));
    for (i, note) in notes.iter().enumerate() {
        ledger
            .append(&format!("case-{}", i % 3), AuditEventKind::ToolCall, json!({ "note": note }))
            .unwrap();
    }
    ledger
}

proptest! {
    #[test]
    fn wilson_brackets_the_point_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(k, n, 1.96).unwrap();
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn mcnemar_is_symmetric_probability(b in 0u64..500, c in 0u64..500) {
        let p = mcnemar_exact(b, c);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!(p, mcnemar_exact(c, b));
    }

    #[test]
    fn fisher_is_invariant_under_transpose(a in 0u64..30, b in 0u64..30, c in 0u64..30, d in 0u64..30) {
        prop_assume!(a + b + c + d > 0);
        let p = fisher_exact([[a, b], [c, d]]);
        let t = fisher_exact([[a, c], [b, d]]);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - t).abs() <= 1e-12);
    }

    #[test]
    fn clean_ledgers_verify(notes in prop::collection::vec(".{0,40}", 1..40)) {
        let ledger = ledger_of(&notes);
        let (report, records) = verify_bytes(ledger.to_jsonl().as_bytes(), Some(&ledger.head()));
        prop_assert!(report.is_clean());
        prop_assert_eq!(records.len(), notes.len());
    }

    #[test]
    fn any_byte_flip_is_located(notes in prop::collection::vec("[a-z ]{0,20}", 1..20), pick in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let ledger = ledger_of(&notes);
        let mut bytes = ledger.to_jsonl().into_bytes();
        let pos = pick.index(bytes.len());
        let line = bytes[..pos].iter().filter(|&&b| b == b'\n').count() as u64;
        bytes[pos] ^= flip;
        let (report, _) = verify_bytes(&bytes, Some(&ledger.head()));
        prop_assert_eq!(report.first_divergence.map(|d| d.seq), Some(line));
    }
}
