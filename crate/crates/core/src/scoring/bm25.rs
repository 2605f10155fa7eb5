//! Okapi BM25 over an in-memory inverted index.
//!
//! score(q, d) = Σ_t qtf(t) · idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//!
//! Query terms are summed in lexicographic order so a query's score depends
//! only on its bag of tokens, bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Query, Scorer};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Token counts of a query, iterated in lexicographic term order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryTerms(BTreeMap<String, u32>);

impl QueryTerms {
    pub fn new(text: &str) -> Self {
        let mut counts = BTreeMap::new();
        for token in tokenize(text) {
            *counts.entry(token).or_insert(0) += 1;
        }
        QueryTerms(counts)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(t, &c)| (t.as_str(), c))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexFile {
    k1: f64,
    b: f64,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    /// term -> (document position, term frequency), ascending by position
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

#[derive(Debug, Clone)]
pub struct LexicalIndex {
    data: IndexFile,
    positions: HashMap<String, usize>,
}

impl PartialEq for LexicalIndex {
    fn eq(&self, other: &Self) -> bool {
        self.data.k1 == other.data.k1
            && self.data.b == other.data.b
            && self.data.doc_ids == other.data.doc_ids
            && self.data.doc_lengths == other.data.doc_lengths
            && self.data.avg_doc_length == other.data.avg_doc_length
            && self.data.postings == other.data.postings
    }
}

impl LexicalIndex {
    pub fn build(corpus: &Corpus, k1: f64, b: f64) -> Result<Self> {
        Self::from_texts(
            corpus.iter().map(|d| (d.doc_id.as_str(), d.text.as_str())),
            k1,
            b,
        )
    }

    /// Indexes arbitrary `(id, text)` pairs; ids must be unique.
    pub fn from_texts<'a>(
        texts: impl IntoIterator<Item = (&'a str, &'a str)>,
        k1: f64,
        b: f64,
    ) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k1 must be positive, got {k1}"
            )));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!(
                "b must lie in [0, 1], got {b}"
            )));
        }
        let mut doc_ids = Vec::new();
        let mut doc_lengths = Vec::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (pos, (id, text)) in texts.into_iter().enumerate() {
            let tokens = tokenize(text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((pos as u32, count));
            }
            doc_ids.push(id.to_string());
            doc_lengths.push(tokens.len() as u32);
        }
        if doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        Self::from_file(IndexFile {
            k1,
            b,
            doc_ids,
            doc_lengths,
            avg_doc_length,
            postings,
        })
    }

    fn from_file(data: IndexFile) -> Result<Self> {
        let mut positions = HashMap::with_capacity(data.doc_ids.len());
        for (i, id) in data.doc_ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: id.clone(),
                });
            }
        }
        if data.doc_lengths.len() != data.doc_ids.len() {
            return Err(Error::InvalidParameter(
                "index has mismatched length table".into(),
            ));
        }
        Ok(LexicalIndex { data, positions })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), &self.data)
            .map_err(|e| Error::io(path, e.into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let data: IndexFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::from_file(data)
    }

    pub fn k1(&self) -> f64 {
        self.data.k1
    }

    pub fn b(&self) -> f64 {
        self.data.b
    }

    pub fn num_docs(&self) -> usize {
        self.data.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.data.doc_ids
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.data.avg_doc_length
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.positions
            .get(doc_id)
            .map(|&i| self.data.doc_lengths[i])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.data.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_freq(&self, term: &str, doc_id: &str) -> u32 {
        match self.positions.get(doc_id) {
            Some(&pos) => self.tf_at(term, pos),
            None => 0,
        }
    }

    pub fn vocabulary_size(&self) -> usize {
        self.data.postings.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn tf_at(&self, term: &str, pos: usize) -> u32 {
        let Some(list) = self.data.postings.get(term) else {
            return 0;
        };
        match list.binary_search_by_key(&(pos as u32), |&(p, _)| p) {
            Ok(i) => list[i].1,
            Err(_) => 0,
        }
    }

    fn term_weight(&self, idf: f64, tf: u32, len: u32) -> f64 {
        let tf = f64::from(tf);
        let k1 = self.data.k1;
        let norm = 1.0 - self.data.b + self.data.b * f64::from(len) / self.data.avg_doc_length;
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    pub fn score(&self, query: &QueryTerms, doc_id: &str) -> Result<f64> {
        let &pos = self.positions.get(doc_id).ok_or_else(|| Error::UnknownId {
            kind: "document",
            id: doc_id.to_string(),
        })?;
        let len = self.data.doc_lengths[pos];
        let mut score = 0.0;
        for (term, qtf) in query.iter() {
            let tf = self.tf_at(term, pos);
            if tf > 0 {
                score += f64::from(qtf) * self.term_weight(self.idf(term), tf, len);
            }
        }
        Ok(score)
    }

    /// Term-at-a-time scoring of every document; identical, bit for bit,
    /// to calling [`LexicalIndex::score`] per document.
    pub fn score_all(&self, query: &QueryTerms) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        for (term, qtf) in query.iter() {
            let Some(list) = self.data.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(pos, tf) in list {
                let len = self.data.doc_lengths[pos as usize];
                scores[pos as usize] += f64::from(qtf) * self.term_weight(idf, tf, len);
            }
        }
        scores
    }
}

/// BM25 document scorer. Contexts are ranked against a question with a
/// throwaway index built over that example's context set.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    index: LexicalIndex,
}

impl LexicalScorer {
    pub fn new(index: LexicalIndex) -> Self {
        LexicalScorer { index }
    }

    pub fn index(&self) -> &LexicalIndex {
        &self.index
    }
}

fn query_text<'a>(scorer: &LexicalScorer, query: &'a Query) -> Result<&'a str> {
    match query {
        Query::Text { text, .. } => Ok(text),
        Query::Vector { .. } => Err(Error::NoEmbeddings {
            scorer: scorer.name().to_string(),
        }),
    }
}

impl Scorer for LexicalScorer {
    fn name(&self) -> &str {
        "bm25"
    }

    fn document_ids(&self) -> &[String] {
        self.index.doc_ids()
    }

    fn score_document(&self, query: &Query, doc_id: &str) -> Result<f64> {
        self.index
            .score(&QueryTerms::new(query_text(self, query)?), doc_id)
    }

    fn score_documents(&self, query: &Query, doc_ids: &[&str]) -> Result<Vec<f64>> {
        let terms = QueryTerms::new(query_text(self, query)?);
        doc_ids
            .iter()
            .map(|d| self.index.score(&terms, d))
            .collect()
    }

    fn score_all(&self, query: &Query) -> Result<Vec<f64>> {
        Ok(self
            .index
            .score_all(&QueryTerms::new(query_text(self, query)?)))
    }

    fn score_contexts(&self, question: &Query, contexts: &[Query]) -> Result<Vec<f64>> {
        if contexts.is_empty() {
            return Ok(Vec::new());
        }
        let texts = contexts
            .iter()
            .map(|c| Ok((c.key(), query_text(self, c)?)))
            .collect::<Result<Vec<_>>>()?;
        let index = LexicalIndex::from_texts(texts, self.index.k1(), self.index.b())?;
        let terms = QueryTerms::new(query_text(self, question)?);
        Ok(index.score_all(&terms))
    }
}
