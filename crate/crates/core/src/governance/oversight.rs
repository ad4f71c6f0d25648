//! Ledger-level check that every recorded outcome rests on a human decision.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::governance::{AuditEventKind, AuditRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnauthorizedRecord {
    pub seq: u64,
    pub case_id: String,
    pub reason: String,
}

/// `Recorded` events that do not point at an earlier, unconsumed
/// `HumanDecision` of the same case and reviewer.
pub fn unauthorized_records(records: &[AuditRecord]) -> Vec<UnauthorizedRecord> {
    let mut consumed = BTreeSet::new();
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.event_kind == AuditEventKind::Recorded) {
        let fail = |reason: &str| UnauthorizedRecord {
            seq: r.seq,
            case_id: r.case_id.clone(),
            reason: reason.to_string(),
        };
        let outcome = &r.payload["outcome"];
        let Some(hd_seq) = outcome["human_decision_seq"].as_u64() else {
            out.push(fail("no human_decision_seq"));
            continue;
        };
        let Some(hd) = records.iter().find(|x| x.seq == hd_seq) else {
            out.push(fail("referenced decision is not in the ledger"));
            continue;
        };
        let decision = &hd.payload["decision"];
        let issue = if hd.event_kind != AuditEventKind::HumanDecision {
            Some("referenced event is not a human decision")
        } else if hd.seq >= r.seq {
            Some("decision does not precede the record")
        } else if hd.case_id != r.case_id || outcome["case_id"] != r.case_id.as_str() {
            Some("decision belongs to another case")
        } else if decision["reviewer_id"].as_str().is_none_or(|s| s.trim().is_empty())
            || decision["reviewer_id"] != outcome["reviewer_id"]
        {
            Some("reviewer does not match")
        } else if !consumed.insert(hd_seq) {
            Some("decision already consumed by another record")
        } else {
            None
        };
        if let Some(reason) = issue {
            out.push(fail(reason));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::AuditLedger;
    use serde_json::json;

    #[test]
    fn forged_record_without_decision_is_reported() {
        let l = AuditLedger::in_memory();
        l.append("c", AuditEventKind::Ingested, json!({})).unwrap();
        l.append_unchecked(
            "c",
            AuditEventKind::Recorded,
            json!({ "outcome": { "case_id": "c", "reviewer_id": "x", "human_decision_seq": 1 } }),
        )
        .unwrap();
        let bad = unauthorized_records(&l.records());
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].seq, 2);
    }

    #[test]
    fn one_decision_cannot_back_two_records() {
        let l = AuditLedger::in_memory();
        l.append_unchecked("c", AuditEventKind::HumanDecision, json!({ "decision": { "reviewer_id": "r" } }))
            .unwrap();
        for _ in 0..2 {
            l.append_unchecked(
                "c",
                AuditEventKind::Recorded,
                json!({ "outcome": { "case_id": "c", "reviewer_id": "r", "human_decision_seq": 1 } }),
            )
            .unwrap();
        }
        let bad = unauthorized_records(&l.records());
        assert_eq!(bad.iter().map(|b| b.seq).collect::<Vec<_>>(), vec![3]);
    }
}
