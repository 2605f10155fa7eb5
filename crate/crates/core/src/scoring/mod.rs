//! Pairwise relevance scoring behind one [`Scorer`] abstraction.
//!
//! The retrieval methods need three relations: document vs query, context vs
//! query, and context vs document. A scorer provides all three; document
//! scoring treats any [`Query`] (a question, a composed query or a context
//! used as a query) uniformly, and context scoring ranks one example's
//! context set against its question.

mod bm25;
mod embedding;
mod hash;
mod rank;

pub use bm25::{LexicalIndex, LexicalScorer, QueryTerms, DEFAULT_B, DEFAULT_K1};
pub use embedding::{
    embedding_score, load_embeddings, read_embeddings_binary, read_embeddings_jsonl,
    write_embeddings_binary, write_embeddings_jsonl, EmbeddingOperand, EmbeddingRecord,
    EmbeddingScorer, EmbeddingTable, Similarity, BINARY_MAGIC,
};
pub use hash::{hash_embedding, CachedHashEmbedder, HashEmbedder};
pub use rank::{ranking_order, select_top_k, RankedList, Scored};

use crate::error::{Error, Result};

/// Canonical ids under which question, context and composed-query vectors
/// are looked up in an embedding table.
pub mod keys {
    pub fn question(example_id: &str) -> String {
        format!("q:{example_id}")
    }

    pub fn context(example_id: &str, ctx_id: &str) -> String {
        format!("c:{example_id}:{ctx_id}")
    }

    /// `METHOD:example_id`, or `METHOD:example_id:ctx_id` when the
    /// composition depends on one chosen context.
    pub fn composed(method: &str, example_id: &str, ctx_id: Option<&str>) -> String {
        match ctx_id {
            Some(ctx) => format!("{method}:{example_id}:{ctx}"),
            None => format!("{method}:{example_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    /// Text with the key its precomputed embedding (if any) is stored under.
    Text {
        key: String,
        text: String,
    },
    Vector {
        key: String,
        vector: Vec<f64>,
    },
}

impl Query {
    pub fn text(key: impl Into<String>, text: impl Into<String>) -> Self {
        Query::Text {
            key: key.into(),
            text: text.into(),
        }
    }

    pub fn key(&self) -> &str {
        match self {
            Query::Text { key, .. } | Query::Vector { key, .. } => key,
        }
    }
}

pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    /// Retrievable documents in corpus order.
    fn document_ids(&self) -> &[String];

    fn score_document(&self, query: &Query, doc_id: &str) -> Result<f64>;

    /// Scores for several documents against one query, in the given order.
    fn score_documents(&self, query: &Query, doc_ids: &[&str]) -> Result<Vec<f64>> {
        doc_ids
            .iter()
            .map(|d| self.score_document(query, d))
            .collect()
    }

    /// Scores for every document, aligned with [`Scorer::document_ids`].
    fn score_all(&self, query: &Query) -> Result<Vec<f64>> {
        self.document_ids()
            .iter()
            .map(|d| self.score_document(query, d))
            .collect()
    }

    /// Relevance of each context to the question, aligned with `contexts`.
    fn score_contexts(&self, question: &Query, contexts: &[Query]) -> Result<Vec<f64>>;

    /// Embedding of a query, for vector composition. Lexical scorers have none.
    fn embed(&self, query: &Query) -> Result<Vec<f64>> {
        let _ = query;
        Err(Error::NoEmbeddings {
            scorer: self.name().to_string(),
        })
    }
}

/// Ranks `candidate_ids` against `query`, keeping the best `k`.
pub fn top_k(
    scorer: &dyn Scorer,
    query: &Query,
    candidate_ids: &[&str],
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if candidate_ids.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let scores = scorer.score_documents(query, candidate_ids)?;
    select_top_k(
        candidate_ids
            .iter()
            .zip(scores)
            .map(|(id, s)| Scored::new(*id, s)),
        k,
    )
}

/// Ranks the scorer's whole document collection against `query`.
pub fn rank_corpus(scorer: &dyn Scorer, query: &Query, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let scores = scorer.score_all(query)?;
    select_top_k(
        scorer
            .document_ids()
            .iter()
            .zip(scores)
            .map(|(id, s)| Scored::new(id.clone(), s)),
        k,
    )
}
