//! Per-case audit export. A bundle carries the case's records verbatim, the
//! ledger head and verification report at export time, and a digest over all
//! of it, so it can be checked without access to the ledger.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::governance::ledger::HASH_ALG;
use crate::governance::{canonical_json, verify_chain, AuditLedger, AuditRecord, Divergence, VerificationReport};

pub const BUNDLE_FORMAT: &str = "underwrite-audit-bundle/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerHead {
    pub seq: u64,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBundle {
    pub format: String,
    pub hash_alg: String,
    pub case_id: String,
    pub records: Vec<AuditRecord>,
    pub ledger_head: LedgerHead,
    pub ledger_verification: VerificationReport,
    pub bundle_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("ledger has no records for case {0:?}")]
    UnknownCase(String),
    #[error("unsupported bundle format {0:?}")]
    UnsupportedFormat(String),
    #[error("bundle digest does not match its contents")]
    DigestMismatch,
    #[error("record {seq} does not hash to its stored this_hash")]
    RecordHash { seq: u64 },
    #[error("record {seq} does not chain to the record before it")]
    BrokenLink { seq: u64 },
    #[error("record {seq} belongs to another case")]
    ForeignRecord { seq: u64 },
    #[error("record {seq} is out of order or beyond the ledger head")]
    OutOfOrder { seq: u64 },
    #[error("ledger failed verification at export time (seq {})", .0.seq)]
    LedgerUnverified(Divergence),
}

#[derive(Serialize)]
struct DigestBody<'a> {
    format: &'a str,
    hash_alg: &'a str,
    case_id: &'a str,
    records: &'a [AuditRecord],
    ledger_head: &'a LedgerHead,
    ledger_verification: &'a VerificationReport,
}

impl AuditBundle {
    pub fn export(ledger: &AuditLedger, case_id: &str) -> Result<Self, BundleError> {
        let records = ledger.records_for(case_id);
        if records.is_empty() {
            return Err(BundleError::UnknownCase(case_id.to_string()));
        }
        let (seq, hash) = ledger.head();
        let mut bundle = AuditBundle {
            format: BUNDLE_FORMAT.into(),
            hash_alg: HASH_ALG.into(),
            case_id: case_id.into(),
            records,
            ledger_head: LedgerHead { seq, hash },
            ledger_verification: verify_chain(ledger),
            bundle_digest: String::new(),
        };
        bundle.bundle_digest = bundle.compute_digest();
        Ok(bundle)
    }

    fn compute_digest(&self) -> String {
        let body = DigestBody {
            format: &self.format,
            hash_alg: &self.hash_alg,
            case_id: &self.case_id,
            records: &self.records,
            ledger_head: &self.ledger_head,
            ledger_verification: &self.ledger_verification,
        };
        hex::encode(Sha256::digest(canonical_json(&body).as_bytes()))
    }

    pub fn verify(&self) -> Result<(), BundleError> {
        if self.format != BUNDLE_FORMAT || self.hash_alg != HASH_ALG {
            return Err(BundleError::UnsupportedFormat(self.format.clone()));
        }
        if self.compute_digest() != self.bundle_digest {
            return Err(BundleError::DigestMismatch);
        }
        if let Some(d) = self.ledger_verification.first_divergence {
            return Err(BundleError::LedgerUnverified(d));
        }
        let mut previous: Option<&AuditRecord> = None;
        for r in &self.records {
            if r.case_id != self.case_id {
                return Err(BundleError::ForeignRecord { seq: r.seq });
            }
            if r.compute_hash().as_deref() != Some(r.this_hash.as_str()) {
                return Err(BundleError::RecordHash { seq: r.seq });
            }
            if r.seq > self.ledger_head.seq {
                return Err(BundleError::OutOfOrder { seq: r.seq });
            }
            if let Some(p) = previous {
                if r.seq <= p.seq {
                    return Err(BundleError::OutOfOrder { seq: r.seq });
                }
                if r.seq == p.seq + 1 && r.prev_hash != p.this_hash {
                    return Err(BundleError::BrokenLink { seq: r.seq });
                }
            }
            if r.seq == self.ledger_head.seq && r.this_hash != self.ledger_head.hash {
                return Err(BundleError::BrokenLink { seq: r.seq });
            }
            previous = Some(r);
        }
        Ok(())
    }
}
