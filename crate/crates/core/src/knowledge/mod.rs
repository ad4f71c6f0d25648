//! Read-only knowledge surface: submissions, the guideline corpus, retrieval
//! and the tool registry. Nothing here mutates a submission, the corpus or any
//! system of record.

pub mod citation;
pub mod retrieval;
pub mod submission;
pub mod tools;

pub use citation::{resolve_citation, Citation, CitationKind, ResolveError, ResolvedCitation, Resolver, Span};
pub use retrieval::{
    retrieve_guidelines, EmbeddingScorer, GuidelineChunk, LexicalScorer, RetrievalError,
    RetrievalStore, Scorer,
};
pub use submission::{
    BaitFact, Document, GroundTruth, HallucinationSeverity, PlantedDefect, RiskSeverity,
    Submission, SubmissionError, Tier, TruthContradiction, TruthRiskFactor,
};
pub use tools::{fixture_registry, Mutability, ToolCallResult, ToolError, ToolRegistry, ToolSpec};
