//! The retrieval methods compared in the experiments.
//!
//! - `OR`: question + the annotated gold context → documents (reference run).
//! - `B1`: question + every context → documents.
//! - `B2`: question → documents; top document → context.
//! - `B3`: question → context; question + that context → documents.
//! - `PCAS`: question → top-`beam` documents; each document picks its best
//!   context; documents are re-ranked by λ·s_dq + (1 − λ)·s_dc and the
//!   winning pair is (top document, its best context).
//!
//! Every argmax and ranking breaks ties by ascending id, never by position,
//! so permuting an example's context list cannot change any result.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextItem, Example};
use crate::error::{Error, Result};
use crate::scoring::{keys, rank_corpus, select_top_k, Query, RankedList, Scored, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "OR")]
    Or,
    B1,
    B2,
    B3,
    #[serde(rename = "PCAS")]
    Pcas,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Or, Method::B1, Method::B2, Method::B3, Method::Pcas];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Or => "OR",
            Method::B1 => "B1",
            Method::B2 => "B2",
            Method::B3 => "B3",
            Method::Pcas => "PCAS",
        }
    }

    /// Whether the method ranks documents with a query composed from the
    /// question and context texts.
    pub fn composes_query(self) -> bool {
        matches!(self, Method::Or | Method::B1 | Method::B3)
    }

    pub fn predicts_context(self) -> bool {
        matches!(self, Method::B2 | Method::B3 | Method::Pcas)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OR" => Ok(Method::Or),
            "B1" => Ok(Method::B1),
            "B2" => Ok(Method::B2),
            "B3" => Ok(Method::B3),
            "PCAS" => Ok(Method::Pcas),
            _ => Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Concatenated text; dense scorers look it up by its composed key.
    Text,
    /// Unit-normalized mean of the component embeddings.
    VectorMean,
}

impl FromStr for Composition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Composition::Text),
            "vector-mean" | "vector_mean" => Ok(Composition::VectorMean),
            _ => Err(Error::InvalidParameter(format!(
                "unknown composition mode {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Length of the ranked document list handed to evaluation.
    pub k_out: usize,
    /// PCAS: number of question-only candidates re-scored jointly.
    pub beam: usize,
    /// PCAS: weight of the question score in the convex combination.
    pub lambda: f64,
    /// PCAS: min-max normalize both score kinds within the beam first.
    pub normalize_combination: bool,
    pub composition: Composition,
    pub separator: String,
    /// B2: how many top documents vote on the context (max score wins).
    pub b2_context_depth: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            method: Method::Pcas,
            k_out: 5,
            beam: 5,
            lambda: 0.6,
            normalize_combination: false,
            composition: Composition::Text,
            separator: " ".into(),
            b2_context_depth: 1,
        }
    }
}

impl MethodConfig {
    pub fn for_method(method: Method) -> Self {
        MethodConfig {
            method,
            ..MethodConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_out == 0 {
            return Err(Error::InvalidParameter("k_out must be positive".into()));
        }
        if self.beam == 0 {
            return Err(Error::InvalidParameter("beam must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.b2_context_depth == 0 {
            return Err(Error::InvalidParameter(
                "b2_context_depth must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Whitespace-free run tag naming the method and its parameters.
    pub fn tag(&self) -> String {
        match self.method {
            Method::Pcas => {
                let mut tag = format!("PCAS_l{}_b{}", self.lambda, self.beam);
                if self.normalize_combination {
                    tag.push_str("_norm");
                }
                tag
            }
            Method::B2 if self.b2_context_depth != 1 => format!("B2_d{}", self.b2_context_depth),
            m => m.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub example_id: String,
    pub method: Method,
    pub ranked_docs: RankedList,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_context: Option<Scored>,
    /// Every context of the example, ranked by the method's context score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranked_contexts: Option<RankedList>,
    /// PCAS: best context (and its raw score) for each beam document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_doc_best_context: Option<BTreeMap<String, Scored>>,
}

impl MethodResult {
    fn documents_only(example: &Example, method: Method, ranked_docs: RankedList) -> Self {
        MethodResult {
            example_id: example.example_id.clone(),
            method,
            ranked_docs,
            predicted_context: None,
            ranked_contexts: None,
            per_doc_best_context: None,
        }
    }

    /// Checks the structural invariants every result must satisfy.
    pub fn check(&self, cfg: &MethodConfig, corpus_size: usize) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::InvalidRanking(format!(
                "{} {}: {msg}",
                self.method, self.example_id
            )))
        };
        self.ranked_docs.validate()?;
        let expected = cfg.k_out.min(corpus_size);
        if self.ranked_docs.len() != expected {
            return fail(format!(
                "{} ranked documents, expected {expected}",
                self.ranked_docs.len()
            ));
        }
        if self.method.predicts_context() != self.predicted_context.is_some() {
            return fail("context prediction presence does not match the method".into());
        }
        if let Some(ranked) = &self.ranked_contexts {
            ranked.validate()?;
            if ranked.first() != self.predicted_context.as_ref() {
                return fail("predicted context is not the top-ranked context".into());
            }
        }
        if self.method == Method::Pcas {
            let (Some(best), Some(top), Some(pred)) = (
                &self.per_doc_best_context,
                self.ranked_docs.first(),
                &self.predicted_context,
            ) else {
                return fail("missing PCAS diagnostics".into());
            };
            if best.get(&top.id) != Some(pred) {
                return fail("top document's paired context differs from the prediction".into());
            }
        }
        Ok(())
    }
}

pub fn question_query(example: &Example) -> Query {
    Query::text(
        keys::question(&example.example_id),
        example.question.clone(),
    )
}

pub fn context_query(example: &Example, ctx: &ContextItem) -> Query {
    Query::text(
        keys::context(&example.example_id, &ctx.ctx_id),
        ctx.text.clone(),
    )
}

/// Builds the query that combines a question with some contexts.
///
/// Text mode joins question and context texts with `separator` in the order
/// given. Vector-mean mode averages the embeddings of the question and the
/// contexts (summed in ascending key order) and rescales to unit length.
pub fn compose_query(
    key: String,
    question: &Query,
    contexts: &[Query],
    mode: Composition,
    separator: &str,
    scorer: &dyn Scorer,
) -> Result<Query> {
    match mode {
        Composition::Text => {
            let mut text = match question {
                Query::Text { text, .. } => text.clone(),
                Query::Vector { .. } => {
                    return Err(Error::InvalidParameter(
                        "text composition needs a text question".into(),
                    ))
                }
            };
            for ctx in contexts {
                match ctx {
                    Query::Text { text: t, .. } => {
                        text.push_str(separator);
                        text.push_str(t);
                    }
                    Query::Vector { .. } => {
                        return Err(Error::InvalidParameter(
                            "text composition needs text contexts".into(),
                        ))
                    }
                }
            }
            Ok(Query::Text { key, text })
        }
        Composition::VectorMean => {
            let mut sum = scorer.embed(question)?;
            let mut ordered: Vec<&Query> = contexts.iter().collect();
            ordered.sort_by(|a, b| a.key().cmp(b.key()));
            for ctx in ordered {
                let v = scorer.embed(ctx)?;
                if v.len() != sum.len() {
                    return Err(Error::DimensionMismatch {
                        id: ctx.key().to_string(),
                        expected: sum.len(),
                        found: v.len(),
                    });
                }
                sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
            }
            let n = (contexts.len() + 1) as f64;
            sum.iter_mut().for_each(|s| *s /= n);
            let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector { id: key });
            }
            sum.iter_mut().for_each(|s| *s /= norm);
            Ok(Query::Vector { key, vector: sum })
        }
    }
}

fn require_contexts(example: &Example) -> Result<()> {
    if example.contexts.is_empty() {
        return Err(Error::EmptyContextSet {
            example_id: example.example_id.clone(),
        });
    }
    Ok(())
}

fn context_queries(example: &Example) -> Vec<Query> {
    example
        .contexts
        .iter()
        .map(|c| context_query(example, c))
        .collect()
}

fn rank_contexts(example: &Example, scores: impl IntoIterator<Item = f64>) -> Result<RankedList> {
    select_top_k(
        example
            .contexts
            .iter()
            .zip(scores)
            .map(|(c, s)| Scored::new(c.ctx_id.clone(), s)),
        example.contexts.len(),
    )
}

pub fn run_or(example: &Example, scorer: &dyn Scorer, cfg: &MethodConfig) -> Result<MethodResult> {
    let gold = example
        .gold_context()
        .ok_or_else(|| Error::MissingGoldContext {
            example_id: example.example_id.clone(),
        })?;
    let query = compose_query(
        keys::composed("OR", &example.example_id, None),
        &question_query(example),
        &[context_query(example, gold)],
        cfg.composition,
        &cfg.separator,
        scorer,
    )?;
    let ranked = rank_corpus(scorer, &query, cfg.k_out)?;
    Ok(MethodResult::documents_only(example, Method::Or, ranked))
}

pub fn run_b1(example: &Example, scorer: &dyn Scorer, cfg: &MethodConfig) -> Result<MethodResult> {
    require_contexts(example)?;
    let query = compose_query(
        keys::composed("B1", &example.example_id, None),
        &question_query(example),
        &context_queries(example),
        cfg.composition,
        &cfg.separator,
        scorer,
    )?;
    let ranked = rank_corpus(scorer, &query, cfg.k_out)?;
    Ok(MethodResult::documents_only(example, Method::B1, ranked))
}

pub fn run_b2(example: &Example, scorer: &dyn Scorer, cfg: &MethodConfig) -> Result<MethodResult> {
    require_contexts(example)?;
    let depth = cfg.b2_context_depth.max(1);
    let full = rank_corpus(scorer, &question_query(example), cfg.k_out.max(depth))?;
    let source: Vec<&str> = full.ids().take(depth).collect();
    let mut context_scores = Vec::with_capacity(example.contexts.len());
    for q in context_queries(example) {
        let per_doc = scorer.score_documents(&q, &source)?;
        context_scores.push(per_doc.into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    let ranked_contexts = rank_contexts(example, context_scores)?;
    Ok(MethodResult {
        example_id: example.example_id.clone(),
        method: Method::B2,
        ranked_docs: full.truncated(cfg.k_out),
        predicted_context: ranked_contexts.first().cloned(),
        ranked_contexts: Some(ranked_contexts),
        per_doc_best_context: None,
    })
}

pub fn run_b3(example: &Example, scorer: &dyn Scorer, cfg: &MethodConfig) -> Result<MethodResult> {
    require_contexts(example)?;
    let question = question_query(example);
    let contexts = context_queries(example);
    let ranked_contexts = rank_contexts(example, scorer.score_contexts(&question, &contexts)?)?;
    let chosen = ranked_contexts
        .first()
        .cloned()
        .expect("non-empty context set");
    let ctx = example
        .context(&chosen.id)
        .expect("ranked id comes from the example");
    let query = compose_query(
        keys::composed("B3", &example.example_id, Some(&chosen.id)),
        &question,
        &[context_query(example, ctx)],
        cfg.composition,
        &cfg.separator,
        scorer,
    )?;
    Ok(MethodResult {
        example_id: example.example_id.clone(),
        method: Method::B3,
        ranked_docs: rank_corpus(scorer, &query, cfg.k_out)?,
        predicted_context: Some(chosen),
        ranked_contexts: Some(ranked_contexts),
        per_doc_best_context: None,
    })
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Convex combination used to re-rank beam documents.
pub fn combine(lambda: f64, doc_score: f64, context_score: f64) -> f64 {
    lambda * doc_score + (1.0 - lambda) * context_score
}

pub fn run_pcas(
    example: &Example,
    scorer: &dyn Scorer,
    cfg: &MethodConfig,
) -> Result<MethodResult> {
    require_contexts(example)?;
    if cfg.beam == 0 {
        return Err(Error::InvalidParameter("beam must be positive".into()));
    }
    let question = question_query(example);
    let beam = rank_corpus(scorer, &question, cfg.beam)?;
    let beam_ids: Vec<&str> = beam.ids().collect();

    // pair_scores[c][d] = s_dc(beam doc d, context c)
    let contexts = context_queries(example);
    let pair_scores = contexts
        .iter()
        .map(|c| scorer.score_documents(c, &beam_ids))
        .collect::<Result<Vec<_>>>()?;

    let mut best = Vec::with_capacity(beam_ids.len());
    for d in 0..beam_ids.len() {
        let ranked = rank_contexts(example, pair_scores.iter().map(|row| row[d]))?;
        best.push(ranked.first().cloned().expect("non-empty context set"));
    }

    let mut doc_part: Vec<f64> = beam.items().iter().map(|s| s.score).collect();
    let mut ctx_part: Vec<f64> = best.iter().map(|s| s.score).collect();
    if cfg.normalize_combination {
        doc_part = min_max(&doc_part);
        ctx_part = min_max(&ctx_part);
    }
    let combined = select_top_k(
        beam_ids
            .iter()
            .zip(doc_part.iter().zip(&ctx_part))
            .map(|(id, (&dq, &dc))| Scored::new(*id, combine(cfg.lambda, dq, dc))),
        beam_ids.len(),
    )?;

    let mut ranked_docs = combined.truncated(cfg.k_out).into_items();
    if cfg.k_out > ranked_docs.len() {
        // Positions past the beam come from the question-only ranking and sit
        // strictly below the last combined score.
        let in_beam: HashSet<&str> = beam_ids.iter().copied().collect();
        let fill = rank_corpus(scorer, &question, cfg.k_out)?;
        let mut floor = ranked_docs.last().map_or(0.0, |s| s.score);
        for item in fill
            .items()
            .iter()
            .filter(|s| !in_beam.contains(s.id.as_str()))
        {
            floor = (floor - 1.0).min(floor.next_down());
            ranked_docs.push(Scored::new(item.id.clone(), floor));
        }
    }

    let per_doc_best_context: BTreeMap<String, Scored> = beam_ids
        .iter()
        .zip(&best)
        .map(|(d, c)| (d.to_string(), c.clone()))
        .collect();
    let top = combined.first().expect("non-empty beam");
    let top_pos = beam_ids
        .iter()
        .position(|d| *d == top.id)
        .expect("top doc is in the beam");
    let ranked_contexts = rank_contexts(example, pair_scores.iter().map(|row| row[top_pos]))?;

    Ok(MethodResult {
        example_id: example.example_id.clone(),
        method: Method::Pcas,
        ranked_docs: RankedList::from_ranked(ranked_docs)?,
        predicted_context: Some(best[top_pos].clone()),
        ranked_contexts: Some(ranked_contexts),
        per_doc_best_context: Some(per_doc_best_context),
    })
}

pub fn run_method(
    example: &Example,
    scorer: &dyn Scorer,
    cfg: &MethodConfig,
) -> Result<MethodResult> {
    match cfg.method {
        Method::Or => run_or(example, scorer, cfg),
        Method::B1 => run_b1(example, scorer, cfg),
        Method::B2 => run_b2(example, scorer, cfg),
        Method::B3 => run_b3(example, scorer, cfg),
        Method::Pcas => run_pcas(example, scorer, cfg),
    }
}

/// Runs one method over every example in parallel; results keep example
/// order. With `check`, each result's invariants are verified.
pub fn run_all(
    examples: &[Example],
    scorer: &dyn Scorer,
    cfg: &MethodConfig,
    check: bool,
) -> Result<Vec<MethodResult>> {
    cfg.validate()?;
    let corpus_size = scorer.document_ids().len();
    examples
        .par_iter()
        .map(|ex| {
            let result = run_method(ex, scorer, cfg)?;
            if check {
                result.check(cfg, corpus_size)?;
            }
            Ok(result)
        })
        .collect()
}
