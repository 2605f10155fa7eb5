//! Brute-force reference implementations and random fixture generators
//! shared by the integration and acceptance tests. Nothing here calls the
//! library's ranking, metric or BM25 code; oracles take only pairwise
//! scores or raw texts as input.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pcas_core::corpus::{ContextItem, Corpus, Document, Example};
use pcas_core::pipelines::{context_query, question_query};
use pcas_core::scoring::{Query, Scorer};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Full sort by descending score, then ascending id.
pub fn brute_sort(mut items: Vec<(String, f64)>) -> Vec<(String, f64)> {
    items.sort_by(|a, b| {
        if a.1 > b.1 {
            std::cmp::Ordering::Less
        } else if a.1 < b.1 {
            std::cmp::Ordering::Greater
        } else {
            a.0.cmp(&b.0)
        }
    });
    items
}

pub fn brute_top(items: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    let mut all = brute_sort(items);
    all.truncate(k);
    all
}

// ---------------------------------------------------------------- BM25

pub fn tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Scores by scanning token lists directly; no postings, no caching.
pub struct NaiveBm25 {
    pub ids: Vec<String>,
    pub docs: Vec<Vec<String>>,
    pub k1: f64,
    pub b: f64,
}

impl NaiveBm25 {
    pub fn new(items: &[(String, String)]) -> Self {
        NaiveBm25 {
            ids: items.iter().map(|(id, _)| id.clone()).collect(),
            docs: items.iter().map(|(_, t)| tokens(t)).collect(),
            k1: 1.2,
            b: 0.75,
        }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        let items: Vec<(String, String)> = corpus
            .iter()
            .map(|d| (d.doc_id.clone(), d.text.clone()))
            .collect();
        Self::new(&items)
    }

    pub fn score(&self, query: &str, doc: usize) -> f64 {
        let n = self.docs.len() as f64;
        let total: usize = self.docs.iter().map(Vec::len).sum();
        let avg = total as f64 / n;
        let mut q = tokens(query);
        q.sort();
        let mut score = 0.0;
        let mut i = 0;
        while i < q.len() {
            let term = &q[i];
            let mut qtf = 0;
            while i < q.len() && &q[i] == term {
                qtf += 1;
                i += 1;
            }
            let tf = self.docs[doc].iter().filter(|t| *t == term).count();
            if tf == 0 {
                continue;
            }
            let df = self.docs.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = tf as f64;
            let norm = 1.0 - self.b + self.b * self.docs[doc].len() as f64 / avg;
            score += f64::from(qtf) * (idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm));
        }
        score
    }

    pub fn scores(&self, query: &str) -> Vec<(String, f64)> {
        (0..self.docs.len())
            .map(|i| (self.ids[i].clone(), self.score(query, i)))
            .collect()
    }

    pub fn rank(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        brute_top(self.scores(query), k)
    }
}

// ---------------------------------------------------------------- metrics

/// Single-gold metrics from integer ranks: recall@k = hits / queries,
/// AP@k = 1/rank when the gold item sits within k.
pub fn brute_recall(
    rankings: &BTreeMap<String, Vec<String>>,
    gold: &BTreeMap<String, String>,
    k: usize,
) -> f64 {
    let mut hits = 0usize;
    for (q, g) in gold {
        if let Some(r) = rankings.get(q) {
            if r.iter().take(k).any(|x| x == g) {
                hits += 1;
            }
        }
    }
    hits as f64 / gold.len() as f64
}

pub fn brute_map(
    rankings: &BTreeMap<String, Vec<String>>,
    gold: &BTreeMap<String, String>,
    k: usize,
) -> f64 {
    let mut total = 0.0;
    for (q, g) in gold {
        if let Some(r) = rankings.get(q) {
            if let Some(pos) = r.iter().take(k).position(|x| x == g) {
                total += 1.0 / (pos + 1) as f64;
            }
        }
    }
    total / gold.len() as f64
}

// ---------------------------------------------------------------- methods

pub struct PcasOracle {
    /// (doc, combined score) for the beam, best first.
    pub docs: Vec<(String, f64)>,
    /// Best pair of the top document: (ctx id, raw context-document score).
    pub context: (String, f64),
}

/// Enumerates every (beam document, context) pair, ranks pairs by combined
/// score and keeps each document's best pair. Pair ties prefer the higher
/// raw context-document score, then the lower ctx id.
pub fn pcas_oracle(example: &Example, scorer: &dyn Scorer, lambda: f64, beam: usize) -> PcasOracle {
    let q = question_query(example);
    let all: Vec<(String, f64)> = scorer
        .document_ids()
        .iter()
        .map(|d| (d.clone(), scorer.score_document(&q, d).unwrap()))
        .collect();
    let beam_docs = brute_top(all, beam);

    let mut pairs = Vec::new();
    for (d, sdq) in &beam_docs {
        for c in &example.contexts {
            let sdc = scorer
                .score_document(&context_query(example, c), d)
                .unwrap();
            let combined = lambda * sdq + (1.0 - lambda) * sdc;
            pairs.push((d.clone(), c.ctx_id.clone(), combined, sdc));
        }
    }
    pairs.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then(b.3.partial_cmp(&a.3).unwrap())
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    let mut best: BTreeMap<String, (String, f64, f64)> = BTreeMap::new();
    for (d, c, combined, sdc) in &pairs {
        best.entry(d.clone())
            .or_insert((c.clone(), *combined, *sdc));
    }
    let docs = brute_sort(best.iter().map(|(d, (_, s, _))| (d.clone(), *s)).collect());
    let top = &best[&docs[0].0];
    PcasOracle {
        context: (top.0.clone(), top.2),
        docs,
    }
}

/// Question-only document ranking from the scorer's pairwise scores.
pub fn question_ranking(example: &Example, scorer: &dyn Scorer, k: usize) -> Vec<(String, f64)> {
    let q = question_query(example);
    brute_top(
        scorer
            .document_ids()
            .iter()
            .map(|d| (d.clone(), scorer.score_document(&q, d).unwrap()))
            .collect(),
        k,
    )
}

/// B2's context choice: the best context against the question-only top doc.
pub fn b2_context(example: &Example, scorer: &dyn Scorer) -> (String, f64) {
    let top = question_ranking(example, scorer, 1).remove(0).0;
    brute_sort(
        example
            .contexts
            .iter()
            .map(|c| {
                (
                    c.ctx_id.clone(),
                    scorer
                        .score_document(&context_query(example, c), &top)
                        .unwrap(),
                )
            })
            .collect(),
    )
    .remove(0)
}

/// Lexical B3 context choice: BM25 of the question over an index of the
/// example's own contexts.
pub fn b3_context_lexical(example: &Example) -> (String, f64) {
    let items: Vec<(String, String)> = example
        .contexts
        .iter()
        .map(|c| (c.ctx_id.clone(), c.text.clone()))
        .collect();
    let index = NaiveBm25::new(&items);
    brute_sort(index.scores(&example.question)).remove(0)
}

pub fn b1_text(example: &Example) -> String {
    let mut parts = vec![example.question.clone()];
    parts.extend(example.contexts.iter().map(|c| c.text.clone()));
    parts.join(" ")
}

pub fn score_query(scorer: &dyn Scorer, query: &Query) -> Vec<(String, f64)> {
    scorer
        .document_ids()
        .iter()
        .map(|d| (d.clone(), scorer.score_document(query, d).unwrap()))
        .collect()
}

// ---------------------------------------------------------------- fixtures

const WORDS: [&str; 14] = [
    "fuel", "winter", "payment", "abroad", "boots", "export", "veteran", "pension", "care", "home",
    "boat", "licence", "claim", "tax",
];

fn phrase(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A small corpus over a tiny vocabulary (so equal scores are common) and
/// one example with up to `max_ctx` distinct contexts.
pub fn random_fixture(rng: &mut ChaCha8Rng, max_docs: usize, max_ctx: usize) -> (Corpus, Example) {
    let n_docs = rng.random_range(1..=max_docs);
    let docs: Vec<Document> = (0..n_docs)
        .map(|i| Document {
            doc_id: format!("d{i:02}"),
            text: phrase(rng, 1, 8),
            source: None,
        })
        .collect();
    let n_ctx = rng.random_range(1..=max_ctx);
    let mut ids: Vec<usize> = (0..n_ctx).collect();
    ids.shuffle(rng);
    let contexts: Vec<ContextItem> = ids
        .iter()
        .map(|i| ContextItem::new(format!("c{i:02}"), phrase(rng, 1, 4)))
        .collect();
    let gold_ctx = contexts[rng.random_range(0..n_ctx)].ctx_id.clone();
    let example = Example {
        example_id: "e0".into(),
        question: phrase(rng, 1, 5),
        contexts,
        gold_doc_id: format!("d{:02}", rng.random_range(0..n_docs)),
        gold_ctx_id: Some(gold_ctx),
    };
    (Corpus::new(docs).unwrap(), example)
}
