//! Authority gate and audit ledger. [`authorize`] is the only code path that
//! can append a `Recorded` event.

mod authority;
pub mod boundary;
mod canonical;
pub mod export;
pub mod ledger;
mod oversight;

pub use authority::{
    authorize, resolve_escalation, Authorization, AuthorizeError, ConcurrencyToken, HumanAction,
    HumanDecision, RecordedOutcome, ResolutionAction,
};
pub use boundary::{detect_boundary_violation, BoundaryMatch, BoundaryPattern, BoundaryReport};
pub use canonical::canonical_json;
pub use oversight::{unauthorized_records, UnauthorizedRecord};
pub use export::{AuditBundle, BundleError};
pub use ledger::{
    verify_bytes, verify_chain, verify_file, AuditEventKind, AuditLedger, AuditRecord, Divergence,
    DivergenceReason, Durability, LedgerError, VerificationReport, GENESIS_HASH,
};
