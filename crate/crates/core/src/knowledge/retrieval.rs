use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_CORPUS: &str = include_str!("../../fixtures/guidelines.json");

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on",
    "or", "the", "to", "with", "this", "that", "must", "may", "any", "all",
];

/// A section of the underwriting manual, chunked at section boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineChunk {
    pub chunk_id: String,
    pub section_label: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
    #[serde(skip)]
    pub lexical_terms: BTreeMap<String, u32>,
}

impl GuidelineChunk {
    pub fn new(chunk_id: &str, section_label: &str, body: &str) -> Self {
        let mut chunk = Self {
            chunk_id: chunk_id.into(),
            section_label: section_label.into(),
            body: body.into(),
            embedding: None,
            lexical_terms: BTreeMap::new(),
        };
        chunk.index_terms();
        chunk
    }

    fn index_terms(&mut self) {
        self.lexical_terms.clear();
        for term in tokenize(&self.section_label).chain(tokenize(&self.body)) {
            *self.lexical_terms.entry(term).or_insert(0) += 1;
        }
    }
}

pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("retrieval store is empty")]
    EmptyStore,
    #[error("k must be positive")]
    ZeroK,
    #[error("duplicate chunk id {0:?}")]
    DuplicateChunkId(String),
    #[error("chunk {0:?} has an empty section label")]
    EmptySectionLabel(String),
    #[error("malformed corpus: {0}")]
    Malformed(String),
}

pub trait Scorer: Send + Sync {
    fn score(&self, query: &str, chunk: &GuidelineChunk) -> f64;

    /// Scores every chunk; override when per-query work can be shared.
    fn score_all(&self, query: &str, chunks: &[GuidelineChunk]) -> Vec<f64> {
        chunks.iter().map(|c| self.score(query, c)).collect()
    }
}

/// Fraction of distinct query terms present in the chunk.
#[derive(Debug, Default, Clone, Copy)]
pub struct LexicalScorer;

impl LexicalScorer {
    fn score_terms(terms: &BTreeSet<String>, chunk: &GuidelineChunk) -> f64 {
        if terms.is_empty() {
            return 0.0;
        }
        let hits = terms
            .iter()
            .filter(|t| chunk.lexical_terms.contains_key(t.as_str()))
            .count();
        hits as f64 / terms.len() as f64
    }
}

impl Scorer for LexicalScorer {
    fn score(&self, query: &str, chunk: &GuidelineChunk) -> f64 {
        Self::score_terms(&tokenize(query).collect(), chunk)
    }

    fn score_all(&self, query: &str, chunks: &[GuidelineChunk]) -> Vec<f64> {
        let terms: BTreeSet<String> = tokenize(query).collect();
        chunks.iter().map(|c| Self::score_terms(&terms, c)).collect()
    }
}

/// Cosine similarity against precomputed chunk embeddings. Chunks without an
/// embedding score zero.
pub struct EmbeddingScorer<F> {
    embed: F,
}

impl<F> EmbeddingScorer<F>
where
    F: Fn(&str) -> Vec<f32> + Send + Sync,
{
    pub fn new(embed: F) -> Self {
        Self { embed }
    }
}

impl<F> Scorer for EmbeddingScorer<F>
where
    F: Fn(&str) -> Vec<f32> + Send + Sync,
{
    fn score(&self, query: &str, chunk: &GuidelineChunk) -> f64 {
        let Some(doc) = chunk.embedding.as_ref() else {
            return 0.0;
        };
        let q = (self.embed)(query);
        let dot: f64 = q.iter().zip(doc).map(|(a, b)| *a as f64 * *b as f64).sum();
        let nq: f64 = q.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        let nd: f64 = doc.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        if nq == 0.0 || nd == 0.0 {
            0.0
        } else {
            dot / (nq * nd)
        }
    }
}

/// Immutable guideline corpus keyed by chunk id.
#[derive(Debug, Clone)]
pub struct RetrievalStore {
    chunks: Vec<GuidelineChunk>,
    by_id: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusEntry {
    chunk_id: String,
    section_label: String,
    body: String,
    #[serde(default)]
    embedding: Option<Vec<f32>>,
}

impl RetrievalStore {
    pub fn new(chunks: Vec<GuidelineChunk>) -> Result<Self, RetrievalError> {
        let mut by_id = BTreeMap::new();
        let mut indexed = Vec::with_capacity(chunks.len());
        for mut chunk in chunks {
            if chunk.section_label.trim().is_empty() {
                return Err(RetrievalError::EmptySectionLabel(chunk.chunk_id));
            }
            if by_id.contains_key(&chunk.chunk_id) {
                return Err(RetrievalError::DuplicateChunkId(chunk.chunk_id));
            }
            chunk.index_terms();
            by_id.insert(chunk.chunk_id.clone(), indexed.len());
            indexed.push(chunk);
        }
        Ok(Self {
            chunks: indexed,
            by_id,
        })
    }

    /// Corpus file format: JSON array of `{chunk_id, section_label, body}`.
    pub fn from_json(raw: &str) -> Result<Self, RetrievalError> {
        let entries: Vec<CorpusEntry> =
            serde_json::from_str(raw).map_err(|e| RetrievalError::Malformed(e.to_string()))?;
        Self::new(
            entries
                .into_iter()
                .map(|e| {
                    let mut c = GuidelineChunk::new(&e.chunk_id, &e.section_label, &e.body);
                    c.embedding = e.embedding;
                    c
                })
                .collect(),
        )
    }

    /// The synthetic guideline corpus shipped with the crate.
    pub fn default_corpus() -> Self {
        Self::from_json(DEFAULT_CORPUS).expect("bundled corpus is valid")
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&GuidelineChunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn chunks(&self) -> &[GuidelineChunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn retrieve_with<'a>(
        &'a self,
        scorer: &dyn Scorer,
        query: &str,
        k: usize,
    ) -> Result<Vec<(&'a GuidelineChunk, f64)>, RetrievalError> {
        if self.chunks.is_empty() {
            return Err(RetrievalError::EmptyStore);
        }
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let mut scored: Vec<(&GuidelineChunk, f64)> =
            self.chunks.iter().zip(scorer.score_all(query, &self.chunks)).collect();
        scored.sort_by(|(ca, sa), (cb, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then_with(|| ca.chunk_id.cmp(&cb.chunk_id))
        });
        scored.truncate(k);
        Ok(scored)
    }
}

/// Top-k chunks under the default lexical scorer, ties broken by chunk id.
pub fn retrieve_guidelines<'a>(
    query: &str,
    store: &'a RetrievalStore,
    k: usize,
) -> Result<Vec<(&'a GuidelineChunk, f64)>, RetrievalError> {
    store.retrieve_with(&LexicalScorer, query, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pre_1980_wiring_query_hits_electrical_section() {
        let store = RetrievalStore::default_corpus();
        let top = retrieve_guidelines("electrical wiring pre-1980", &store, 3).unwrap();
        assert_eq!(
            top[0].0.section_label,
            "Electrical systems in pre-1980 buildings"
        );
    }

    #[test]
    fn k_is_clamped_to_corpus_size() {
        let store = RetrievalStore::default_corpus();
        let all = retrieve_guidelines("roof", &store, 10_000).unwrap();
        assert_eq!(all.len(), store.len());
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn ties_break_by_chunk_id() {
        let store = RetrievalStore::new(vec![
            GuidelineChunk::new("B-2", "Alpha", "roof hail"),
            GuidelineChunk::new("A-9", "Beta", "roof wind"),
            GuidelineChunk::new("C-1", "Gamma", "nothing relevant"),
        ])
        .unwrap();
        let ranked = retrieve_guidelines("roof damage", &store, 3).unwrap();
        let ids: Vec<_> = ranked.iter().map(|(c, _)| c.chunk_id.as_str()).collect();
        assert_eq!(ids, ["A-9", "B-2", "C-1"]);
        assert_eq!(ranked[0].1, ranked[1].1);
    }

    #[test]
    fn empty_store_and_zero_k_are_errors() {
        let empty = RetrievalStore::new(vec![]).unwrap();
        assert_eq!(
            retrieve_guidelines("x", &empty, 1).unwrap_err(),
            RetrievalError::EmptyStore
        );
        let store = RetrievalStore::default_corpus();
        assert_eq!(
            retrieve_guidelines("x", &store, 0).unwrap_err(),
            RetrievalError::ZeroK
        );
    }

    #[test]
    fn duplicate_ids_and_blank_labels_are_rejected() {
        let dup = RetrievalStore::new(vec![
            GuidelineChunk::new("G", "a", "x"),
            GuidelineChunk::new("G", "b", "y"),
        ]);
        assert_eq!(dup.unwrap_err(), RetrievalError::DuplicateChunkId("G".into()));
        let blank = RetrievalStore::new(vec![GuidelineChunk::new("G", " ", "x")]);
        assert_eq!(blank.unwrap_err(), RetrievalError::EmptySectionLabel("G".into()));
    }

    #[test]
    fn embedding_scorer_ranks_by_cosine() {
        let mut a = GuidelineChunk::new("a", "A", "x");
        a.embedding = Some(vec![1.0, 0.0]);
        let mut b = GuidelineChunk::new("b", "B", "y");
        b.embedding = Some(vec![0.0, 1.0]);
        let store = RetrievalStore::new(vec![a, b]).unwrap();
        let scorer = EmbeddingScorer::new(|_: &str| vec![0.1, 0.9]);
        let ranked = store.retrieve_with(&scorer, "anything", 2).unwrap();
        assert_eq!(ranked[0].0.chunk_id, "b");
    }

    #[test]
    fn lexical_retrieval_is_deterministic() {
        let store = RetrievalStore::default_corpus();
        let q = "restaurant liquor bar cocktails";
        let a: Vec<_> = retrieve_guidelines(q, &store, 5)
            .unwrap()
            .into_iter()
            .map(|(c, s)| (c.chunk_id.clone(), s))
            .collect();
        let b: Vec<_> = retrieve_guidelines(q, &store, 5)
            .unwrap()
            .into_iter()
            .map(|(c, s)| (c.chunk_id.clone(), s))
            .collect();
        assert_eq!(a, b);
    }
}
