//! Decision-negative underwriting workflow engine.
//!
//! A primary agent drafts a recommendation for each submission, a critic agent
//! attacks the draft once, the agent revises, and the result waits for a human
//! underwriter. Nothing in this crate can record a binding outcome without a
//! [`governance::HumanDecision`]; every step is appended to a hash-chained
//! [`governance::AuditLedger`].
//!
//! The [`simulation`] and [`evaluation`] modules replay the measurement
//! protocol with scripted agent behaviour so the statistics can be checked
//! without a live model.

pub mod agent;
pub mod cli;
pub mod clock;
pub mod evaluation;
pub mod governance;
pub mod knowledge;
pub mod service;
pub mod simulation;
pub mod workflow;

pub use agent::{CritiqueReport, DraftDecision, Recommendation};
pub use governance::{AuditLedger, HumanDecision};
pub use knowledge::{Citation, Submission};
pub use workflow::{CaseDossier, CaseState, WorkflowCase};
