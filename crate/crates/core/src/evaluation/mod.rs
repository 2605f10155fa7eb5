//! Recall@K and MAP@K with trec_eval semantics.
//!
//! Aggregates are arithmetic means over the queries in the qrels. A qrels
//! query missing from the run scores 0; run queries absent from the qrels
//! are ignored. AP@K divides by the total number of relevant items.

mod report;
mod sweep;
mod trec;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use report::{render_report_jsonl, render_report_table, ReportRow, Target};
pub use sweep::{sweep, SweepRow};
pub use trec::{
    parse_qrels, parse_trec_run, parse_trec_run_tagged, write_qrels, write_trec_run, TaggedRun,
};

use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::pipelines::MethodResult;
use crate::scoring::RankedList;

/// Relevance judgments: query id → (item id → grade ≥ 1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels(pub BTreeMap<String, BTreeMap<String, u32>>);

impl Qrels {
    pub fn insert(&mut self, query_id: impl Into<String>, item_id: impl Into<String>, grade: u32) {
        if grade >= 1 {
            self.0
                .entry(query_id.into())
                .or_default()
                .insert(item_id.into(), grade);
        }
    }

    /// One relevant document per example.
    pub fn documents(examples: &[Example]) -> Self {
        let mut q = Qrels::default();
        for ex in examples {
            q.insert(ex.example_id.clone(), ex.gold_doc_id.clone(), 1);
        }
        q
    }

    /// One relevant context per example that has a gold context.
    pub fn contexts(examples: &[Example]) -> Self {
        let mut q = Qrels::default();
        for ex in examples {
            if let Some(ctx) = &ex.gold_ctx_id {
                q.insert(ex.example_id.clone(), ctx.clone(), 1);
            }
        }
        q
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.0.iter().map(|(q, rel)| (q.as_str(), rel))
    }
}

/// System output: query id → ranked items.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Run(pub BTreeMap<String, RankedList>);

impl Run {
    pub fn insert(&mut self, query_id: impl Into<String>, list: RankedList) {
        self.0.insert(query_id.into(), list);
    }

    pub fn get(&self, query_id: &str) -> Option<&RankedList> {
        self.0.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn documents(results: &[MethodResult]) -> Self {
        Run(results
            .iter()
            .map(|r| (r.example_id.clone(), r.ranked_docs.clone()))
            .collect())
    }

    /// Context rankings of context-predicting results; other results are skipped.
    pub fn contexts(results: &[MethodResult]) -> Self {
        Run(results
            .iter()
            .filter_map(|r| r.ranked_contexts.clone().map(|c| (r.example_id.clone(), c)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Recall,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
}

impl MetricSpec {
    pub fn recall(k: usize) -> Self {
        MetricSpec {
            kind: MetricKind::Recall,
            k,
        }
    }

    pub fn map(k: usize) -> Self {
        MetricSpec {
            kind: MetricKind::Map,
            k,
        }
    }

    pub fn new(name: &str, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "metric cutoff must be positive".into(),
            ));
        }
        let kind = match name.to_ascii_lowercase().as_str() {
            "recall" | "r" => MetricKind::Recall,
            "map" | "m" | "map_cut" => MetricKind::Map,
            _ => return Err(Error::UnknownMetric(name.to_string())),
        };
        Ok(MetricSpec { kind, k })
    }

    /// Short column label, e.g. `R@1` or `M@5`.
    pub fn label(&self) -> String {
        match self.kind {
            MetricKind::Recall => format!("R@{}", self.k),
            MetricKind::Map => format!("M@{}", self.k),
        }
    }

    pub fn compute(&self, run: &Run, qrels: &Qrels) -> MetricValues {
        match self.kind {
            MetricKind::Recall => recall_at_k(run, qrels, self.k),
            MetricKind::Map => map_at_k(run, qrels, self.k),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MetricKind::Recall => write!(f, "recall@{}", self.k),
            MetricKind::Map => write!(f, "map@{}", self.k),
        }
    }
}

/// Accepts `recall@5`, `map@5`, `R@1`, `M@5` and trec_eval's `recall_5`,
/// `map_cut_5`.
impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, k) = s
            .rsplit_once('@')
            .or_else(|| s.rsplit_once('_'))
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))?;
        let k = k.parse().map_err(|_| Error::UnknownMetric(s.to_string()))?;
        MetricSpec::new(name, k).map_err(|e| match e {
            Error::UnknownMetric(_) => Error::UnknownMetric(s.to_string()),
            other => other,
        })
    }
}

/// One metric's per-query values and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub per_query: BTreeMap<String, f64>,
    pub aggregate: f64,
}

fn per_query_metric(
    run: &Run,
    qrels: &Qrels,
    f: impl Fn(&RankedList, &BTreeMap<String, u32>) -> f64,
) -> MetricValues {
    let empty = RankedList::empty();
    let per_query: BTreeMap<String, f64> = qrels
        .queries()
        .map(|(q, rel)| (q.to_string(), f(run.get(q).unwrap_or(&empty), rel)))
        .collect();
    let aggregate = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    MetricValues {
        per_query,
        aggregate,
    }
}

/// |relevant ∩ top-k| / |relevant| per query.
pub fn recall_at_k(run: &Run, qrels: &Qrels, k: usize) -> MetricValues {
    per_query_metric(run, qrels, |list, rel| {
        let hits = list
            .ids()
            .take(k)
            .filter(|id| rel.contains_key(*id))
            .count();
        hits as f64 / rel.len() as f64
    })
}

/// Average precision truncated at rank k, normalized by |relevant|.
pub fn map_at_k(run: &Run, qrels: &Qrels, k: usize) -> MetricValues {
    per_query_metric(run, qrels, |list, rel| {
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, id) in list.ids().take(k).enumerate() {
            if rel.contains_key(id) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        sum / rel.len() as f64
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    pub aggregate: BTreeMap<String, f64>,
}

impl MetricsReport {
    pub fn get(&self, metric: &MetricSpec) -> Option<f64> {
        self.aggregate.get(&metric.to_string()).copied()
    }
}

pub fn evaluate_run(run: &Run, qrels: &Qrels, metrics: &[MetricSpec]) -> MetricsReport {
    let mut report = MetricsReport::default();
    for metric in metrics {
        let name = metric.to_string();
        let values = metric.compute(run, qrels);
        for (q, v) in values.per_query {
            report
                .per_query
                .entry(q)
                .or_default()
                .insert(name.clone(), v);
        }
        report.aggregate.insert(name, values.aggregate);
    }
    report
}

/// [`evaluate_run`] with metrics given as `(name, k)` pairs.
pub fn evaluate_run_named(
    run: &Run,
    qrels: &Qrels,
    metrics: &[(&str, usize)],
) -> Result<MetricsReport> {
    let specs = metrics
        .iter()
        .map(|(name, k)| MetricSpec::new(name, *k))
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate_run(run, qrels, &specs))
}
