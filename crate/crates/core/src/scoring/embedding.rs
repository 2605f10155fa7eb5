//! Precomputed dense vectors and the scorer that consumes them.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hash::{CachedHashEmbedder, HashEmbedder};
use super::{Query, Scorer};
use crate::corpus::{read_jsonl, write_jsonl, Corpus};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"PCASEMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Dot,
    Cosine,
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Similarity::Dot),
            "cosine" | "cos" => Ok(Similarity::Cosine),
            other => Err(Error::InvalidParameter(format!(
                "unknown similarity {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Dot => "dot",
            Similarity::Cosine => "cosine",
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Similarity {
    /// `left`/`right` name the operands in zero-vector errors.
    pub fn apply(self, a: &[f64], left: &str, b: &[f64], right: &str) -> Result<f64> {
        match self {
            Similarity::Dot => Ok(dot(a, b)),
            Similarity::Cosine => {
                let na = norm(a);
                if na == 0.0 {
                    return Err(Error::ZeroVector {
                        id: left.to_string(),
                    });
                }
                let nb = norm(b);
                if nb == 0.0 {
                    return Err(Error::ZeroVector {
                        id: right.to_string(),
                    });
                }
                Ok(dot(a, b) / (na * nb))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Fixed-dimension vectors keyed by id, kept in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    similarity: Similarity,
    ids: Vec<String>,
    data: Vec<f64>,
    positions: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, similarity: Similarity) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(EmbeddingTable {
            dimension,
            similarity,
            ids: Vec::new(),
            data: Vec::new(),
            positions: HashMap::new(),
        })
    }

    pub fn from_records(
        records: impl IntoIterator<Item = EmbeddingRecord>,
        similarity: Similarity,
    ) -> Result<Self> {
        let mut records = records.into_iter().peekable();
        let dimension = records.peek().map_or(1, |r| r.vector.len());
        if dimension == 0 {
            let id = records.peek().map(|r| r.id.clone()).unwrap_or_default();
            return Err(Error::DimensionMismatch {
                id,
                expected: 1,
                found: 0,
            });
        }
        let mut table = EmbeddingTable::new(dimension, similarity)?;
        for r in records {
            table.insert(r.id, &r.vector)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, id: String, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                id,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        if self.positions.contains_key(&id) {
            return Err(Error::DuplicateId {
                kind: "embedding",
                id,
            });
        }
        self.positions.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.positions
            .get(id)
            .map(|&i| &self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    fn require(&self, id: &str) -> Result<&[f64]> {
        self.get(id).ok_or_else(|| Error::UnknownId {
            kind: "embedding",
            id: id.to_string(),
        })
    }

    pub fn records(&self) -> impl Iterator<Item = EmbeddingRecord> + '_ {
        self.ids.iter().map(|id| EmbeddingRecord {
            id: id.clone(),
            vector: self.get(id).unwrap().to_vec(),
        })
    }
}

/// Either side of an embedding comparison: a stored id or a literal vector.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingOperand<'a> {
    Id(&'a str),
    Vector(&'a [f64]),
}

/// Similarity between `left` and the stored vector `right_id`, under the
/// table's similarity setting.
pub fn embedding_score(
    table: &EmbeddingTable,
    left: EmbeddingOperand<'_>,
    right_id: &str,
) -> Result<f64> {
    let (a, left_name) = match left {
        EmbeddingOperand::Id(id) => (table.require(id)?, id),
        EmbeddingOperand::Vector(v) => {
            if v.len() != table.dimension() {
                return Err(Error::DimensionMismatch {
                    id: "<query>".into(),
                    expected: table.dimension(),
                    found: v.len(),
                });
            }
            (v, "<query>")
        }
    };
    let b = table.require(right_id)?;
    table.similarity().apply(a, left_name, b, right_id)
}

/// Loads a table, detecting the binary form by its magic prefix.
pub fn load_embeddings(path: impl AsRef<Path>, similarity: Similarity) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 8];
    let n = read_up_to(&mut file, &mut head).map_err(|e| Error::io(path, e))?;
    if n == 8 && &head == BINARY_MAGIC {
        read_embeddings_binary(path, similarity)
    } else {
        read_embeddings_jsonl(path, similarity)
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

pub fn read_embeddings_jsonl(
    path: impl AsRef<Path>,
    similarity: Similarity,
) -> Result<EmbeddingTable> {
    let records: Vec<(usize, EmbeddingRecord)> = read_jsonl(path.as_ref())?;
    EmbeddingTable::from_records(records.into_iter().map(|(_, r)| r), similarity)
}

pub fn write_embeddings_jsonl(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path, &table.records().collect::<Vec<_>>())
}

/// Writes the binary form. Components are stored as f32.
pub fn write_embeddings_binary(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let dim = u32::try_from(table.dimension())
        .map_err(|_| Error::InvalidParameter("dimension exceeds u32".into()))?;
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(BINARY_MAGIC).map_err(io)?;
    w.write_all(&dim.to_le_bytes()).map_err(io)?;
    for id in table.ids() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidParameter(format!("id longer than 65535 bytes: {id:?}")))?;
        w.write_all(&len.to_le_bytes()).map_err(io)?;
        w.write_all(id.as_bytes()).map_err(io)?;
        for &x in table.get(id).unwrap() {
            w.write_all(&(x as f32).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_embeddings_binary(
    path: impl AsRef<Path>,
    similarity: Similarity,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    // the "line" of a binary parse error is the 1-based record number
    let bad = |record: usize, msg: &str| Error::parse(path, record, msg);
    if bytes.len() < 12 || &bytes[..8] != BINARY_MAGIC {
        return Err(bad(0, "missing PCASEMB1 header"));
    }
    let dimension = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut table = EmbeddingTable::new(dimension, similarity)?;
    let mut at = 12;
    let mut record = 0;
    while at < bytes.len() {
        record += 1;
        let len_end = at + 2;
        if len_end > bytes.len() {
            return Err(bad(record, "truncated id length"));
        }
        let id_len = u16::from_le_bytes(bytes[at..len_end].try_into().unwrap()) as usize;
        let id_end = len_end + id_len;
        let vec_end = id_end + 4 * dimension;
        if vec_end > bytes.len() {
            return Err(bad(record, "truncated record"));
        }
        let id = std::str::from_utf8(&bytes[len_end..id_end])
            .map_err(|_| bad(record, "id is not UTF-8"))?
            .to_string();
        let vector: Vec<f64> = bytes[id_end..vec_end]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        table.insert(id, &vector)?;
        at = vec_end;
    }
    Ok(table)
}

/// Dense scorer over an embedding table. With a fallback embedder, vectors
/// missing from the table are derived from the query or document text;
/// without one, a missing id is an error.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer {
    name: String,
    table: EmbeddingTable,
    documents: Vec<String>,
    fallback: Option<Arc<CachedHashEmbedder>>,
}

impl EmbeddingScorer {
    pub fn new(
        mut table: EmbeddingTable,
        corpus: &Corpus,
        fallback: Option<HashEmbedder>,
    ) -> Result<Self> {
        if let Some(f) = fallback {
            if f.dimension != table.dimension() {
                return Err(Error::DimensionMismatch {
                    id: "<hash fallback>".into(),
                    expected: table.dimension(),
                    found: f.dimension,
                });
            }
        }
        let fallback = fallback.map(|f| Arc::new(CachedHashEmbedder::new(f)));
        for doc in corpus.iter() {
            if table.get(&doc.doc_id).is_some() {
                continue;
            }
            match &fallback {
                Some(f) => table.insert(doc.doc_id.clone(), &f.embed(&doc.text))?,
                None => {
                    return Err(Error::UnknownId {
                        kind: "embedding",
                        id: doc.doc_id.clone(),
                    })
                }
            }
        }
        Ok(EmbeddingScorer {
            name: format!("dense-{}", table.similarity()),
            table,
            documents: corpus.iter().map(|d| d.doc_id.clone()).collect(),
            fallback,
        })
    }

    /// Scorer whose every vector comes from the hash provider.
    pub fn hashed(corpus: &Corpus, embedder: HashEmbedder, similarity: Similarity) -> Result<Self> {
        let table = EmbeddingTable::new(embedder.dimension, similarity)?;
        let mut scorer = Self::new(table, corpus, Some(embedder))?;
        scorer.name = format!("hash{}-{}", embedder.dimension, similarity);
        Ok(scorer)
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    fn resolve<'a>(&'a self, query: &'a Query) -> Result<Cow<'a, [f64]>> {
        match query {
            Query::Text { key, text } => match (self.table.get(key), &self.fallback) {
                (Some(v), _) => Ok(Cow::Borrowed(v)),
                (None, Some(f)) => Ok(Cow::Owned(f.embed(text))),
                (None, None) => Err(Error::UnknownId {
                    kind: "embedding",
                    id: key.clone(),
                }),
            },
            Query::Vector { key, vector } => {
                if vector.len() != self.table.dimension() {
                    return Err(Error::DimensionMismatch {
                        id: key.clone(),
                        expected: self.table.dimension(),
                        found: vector.len(),
                    });
                }
                Ok(Cow::Borrowed(vector))
            }
        }
    }

    fn doc_vector(&self, doc_id: &str) -> Result<&[f64]> {
        self.table.require(doc_id)
    }
}

impl Scorer for EmbeddingScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn document_ids(&self) -> &[String] {
        &self.documents
    }

    fn score_document(&self, query: &Query, doc_id: &str) -> Result<f64> {
        let q = self.resolve(query)?;
        self.table
            .similarity()
            .apply(&q, query.key(), self.doc_vector(doc_id)?, doc_id)
    }

    fn score_documents(&self, query: &Query, doc_ids: &[&str]) -> Result<Vec<f64>> {
        let q = self.resolve(query)?;
        let sim = self.table.similarity();
        doc_ids
            .iter()
            .map(|d| sim.apply(&q, query.key(), self.doc_vector(d)?, d))
            .collect()
    }

    fn score_all(&self, query: &Query) -> Result<Vec<f64>> {
        let ids: Vec<&str> = self.documents.iter().map(String::as_str).collect();
        self.score_documents(query, &ids)
    }

    fn score_contexts(&self, question: &Query, contexts: &[Query]) -> Result<Vec<f64>> {
        let q = self.resolve(question)?;
        let sim = self.table.similarity();
        contexts
            .iter()
            .map(|c| {
                let v = self.resolve(c)?;
                sim.apply(&v, c.key(), &q, question.key())
            })
            .collect()
    }

    fn embed(&self, query: &Query) -> Result<Vec<f64>> {
        self.resolve(query).map(Cow::into_owned)
    }
}
