//! Documents, user contexts and evaluation examples, plus their
//! line-delimited JSON file formats.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub ctx_id: String,
    pub text: String,
}

impl ContextItem {
    pub fn new(ctx_id: impl Into<String>, text: impl Into<String>) -> Self {
        ContextItem {
            ctx_id: ctx_id.into(),
            text: text.into(),
        }
    }
}

/// One evaluation unit: a single-turn question asked by one user, that
/// user's candidate contexts, and the annotated gold document and context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub example_id: String,
    pub question: String,
    pub contexts: Vec<ContextItem>,
    pub gold_doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_ctx_id: Option<String>,
}

impl Example {
    pub fn context(&self, ctx_id: &str) -> Option<&ContextItem> {
        self.contexts.iter().find(|c| c.ctx_id == ctx_id)
    }

    pub fn gold_context(&self) -> Option<&ContextItem> {
        self.gold_ctx_id.as_deref().and_then(|id| self.context(id))
    }

    /// Checks the per-example invariants enforced at load time: non-empty
    /// ids and context texts, unique ctx ids and a resolvable gold context.
    pub fn check(&self) -> Result<()> {
        if self.example_id.is_empty() {
            return Err(Error::InvalidParameter("empty example_id".into()));
        }
        let mut seen = HashSet::new();
        for ctx in &self.contexts {
            if ctx.ctx_id.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "example {:?} has a context with an empty ctx_id",
                    self.example_id
                )));
            }
            if ctx.text.trim().is_empty() {
                return Err(Error::EmptyText {
                    kind: "context",
                    id: ctx.ctx_id.clone(),
                });
            }
            if !seen.insert(ctx.ctx_id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "context",
                    id: ctx.ctx_id.clone(),
                });
            }
        }
        if let Some(gold) = &self.gold_ctx_id {
            if !seen.contains(gold.as_str()) {
                return Err(Error::UnknownGoldContext {
                    example_id: self.example_id.clone(),
                    ctx_id: gold.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Immutable passage collection. Iteration follows insertion (file) order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    positions: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.doc_id.is_empty() {
                return Err(Error::InvalidParameter("empty doc_id".into()));
            }
            if doc.text.trim().is_empty() {
                return Err(Error::EmptyText {
                    kind: "document",
                    id: doc.doc_id.clone(),
                });
            }
            if positions.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: doc.doc_id.clone(),
                });
            }
        }
        Ok(Corpus {
            documents,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.positions.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.positions.contains_key(doc_id)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.documents.iter()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let records: Vec<(usize, Document)> = read_jsonl(path)?;
    let mut documents = Vec::with_capacity(records.len());
    let mut seen = HashSet::new();
    for (line, doc) in records {
        if doc.doc_id.is_empty() {
            return Err(Error::parse(path, line, "empty doc_id"));
        }
        if doc.text.trim().is_empty() {
            return Err(Error::EmptyText {
                kind: "document",
                id: doc.doc_id,
            });
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "document",
                id: doc.doc_id,
            });
        }
        documents.push(doc);
    }
    Corpus::new(documents)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path, corpus.documents())
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let records: Vec<(usize, Example)> = read_jsonl(path)?;
    let mut ids = HashSet::new();
    let mut examples = Vec::with_capacity(records.len());
    for (line, example) in records {
        example.check().map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::parse(path, line, msg),
            other => other,
        })?;
        if !ids.insert(example.example_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "example",
                id: example.example_id,
            });
        }
        examples.push(example);
    }
    Ok(examples)
}

pub fn write_examples(examples: &[Example], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path, examples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    MissingGoldDoc,
    DuplicateContextText,
    EmptyContextSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub example_id: String,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }
}

/// Cross-checks examples against a corpus. Findings are collected, never
/// raised; an empty report means every retrieval method can run.
pub fn validate(corpus: &Corpus, examples: &[Example]) -> ValidationReport {
    let mut findings = Vec::new();
    for ex in examples {
        if !corpus.contains(&ex.gold_doc_id) {
            findings.push(Finding {
                example_id: ex.example_id.clone(),
                kind: FindingKind::MissingGoldDoc,
                detail: ex.gold_doc_id.clone(),
            });
        }
        if ex.contexts.is_empty() {
            findings.push(Finding {
                example_id: ex.example_id.clone(),
                kind: FindingKind::EmptyContextSet,
                detail: String::new(),
            });
        }
        let mut seen: HashMap<String, &str> = HashMap::new();
        for ctx in &ex.contexts {
            if let Some(first) = seen.insert(normalize(&ctx.text), &ctx.ctx_id) {
                findings.push(Finding {
                    example_id: ex.example_id.clone(),
                    kind: FindingKind::DuplicateContextText,
                    detail: format!("{} duplicates {}", ctx.ctx_id, first),
                });
            }
        }
    }
    ValidationReport { findings }
}

/// Reads one JSON record per non-blank line, returning 1-based line numbers
/// alongside the records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, record));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
