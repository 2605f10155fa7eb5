//! Expands single-context examples into context sets.
//!
//! Each example keeps its gold context and receives further contexts drawn
//! without replacement from the pool of every example's gold context. A
//! draw is kept only if the judge finds it compatible with the contexts
//! accepted so far, so some sets end up smaller than the target.
//!
//! Randomness comes from ChaCha8 seeded with `BuildConfig::seed`, one
//! stream per example (stream number = example position), so each set
//! depends only on the seed, its position and the pool.

mod judge;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use judge::{
    judge_by_name, ContradictionJudge, HeuristicJudge, PermissiveJudge, StrictJudge, Verdict,
};

use crate::corpus::{ContextItem, Example};
use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckAgainst {
    /// Candidates are judged against the gold context only.
    GoldOnly,
    /// Candidates are judged against every context accepted so far.
    AllAccepted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub target_size: usize,
    /// Sets smaller than this are reported as short.
    pub min_size: usize,
    /// Consecutive rejected draws tolerated while filling one slot.
    pub max_attempts_per_slot: usize,
    pub seed: u64,
    pub check_against: CheckAgainst,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            target_size: 10,
            min_size: 6,
            max_attempts_per_slot: 10,
            seed: 0,
            check_against: CheckAgainst::AllAccepted,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 || self.min_size == 0 || self.max_attempts_per_slot == 0 {
            return Err(Error::InvalidParameter(
                "target_size, min_size and max_attempts_per_slot must be positive".into(),
            ));
        }
        if self.min_size > self.target_size {
            return Err(Error::InvalidParameter(format!(
                "min_size {} exceeds target_size {}",
                self.min_size, self.target_size
            )));
        }
        Ok(())
    }

    /// Generator for the example at `position`.
    pub fn rng_for(&self, position: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(position as u64);
        rng
    }
}

/// The gold context of a source example: the one named by `gold_ctx_id`,
/// or the only context when no id is given.
pub fn source_gold_context(example: &Example) -> Result<&ContextItem> {
    match (example.gold_context(), example.contexts.as_slice()) {
        (Some(ctx), _) => Ok(ctx),
        (None, [only]) if example.gold_ctx_id.is_none() => Ok(only),
        _ => Err(Error::MissingGoldContext {
            example_id: example.example_id.clone(),
        }),
    }
}

/// Distinct gold-context texts in first-occurrence order, compared after
/// normalization.
pub fn collect_pool(examples: &[Example]) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for ex in examples {
        let ctx = source_gold_context(ex)?;
        if seen.insert(normalize(&ctx.text)) {
            pool.push(ctx.text.clone());
        }
    }
    Ok(pool)
}

/// Builds one context set. The result starts with `gold` and lists accepted
/// contexts in insertion order.
pub fn build_context_set(
    gold: &str,
    pool: &[String],
    judge: &dyn ContradictionJudge,
    cfg: &BuildConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut members = vec![gold.to_string()];
    let mut seen: HashSet<String> = HashSet::from([normalize(gold)]);
    let mut candidates: Vec<&String> = pool
        .iter()
        .filter(|p| normalize(p) != normalize(gold))
        .collect();
    let mut failures = 0;
    while members.len() < cfg.target_size
        && !candidates.is_empty()
        && failures < cfg.max_attempts_per_slot
    {
        let pick = rng.random_range(0..candidates.len());
        let candidate = candidates.swap_remove(pick);
        if seen.contains(&normalize(candidate)) {
            failures += 1;
            continue;
        }
        let verdict = match cfg.check_against {
            CheckAgainst::AllAccepted => {
                let accepted: Vec<&str> = members.iter().map(String::as_str).collect();
                judge.judge(candidate, &accepted)
            }
            CheckAgainst::GoldOnly => judge.judge(candidate, &[gold]),
        };
        match verdict {
            Verdict::Compatible => {
                seen.insert(normalize(candidate));
                members.push(candidate.clone());
                failures = 0;
            }
            Verdict::Contradicts => failures += 1,
        }
    }
    members
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetDiagnostic {
    pub example_id: String,
    pub size: usize,
    /// Below `min_size`, not just below the target.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub examples: usize,
    /// Mean context-set size, rounded to two decimals.
    pub mean_set_size: f64,
    pub short_set_count: usize,
    pub undersized: Vec<SetDiagnostic>,
    pub seed: u64,
    pub judge: String,
    pub target_size: usize,
    pub min_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltDataset {
    pub examples: Vec<Example>,
    /// Per example, the contexts in the order they were accepted.
    pub insertion_orders: Vec<Vec<String>>,
    pub report: BuildReport,
}

/// Expands every source example. Output contexts are shuffled and then
/// named `c00`, `c01`, … by position so the gold context's id carries no
/// signal.
pub fn build_dataset(
    sources: &[Example],
    judge: &dyn ContradictionJudge,
    cfg: &BuildConfig,
) -> Result<BuiltDataset> {
    cfg.validate()?;
    let pool = collect_pool(sources)?;
    let mut examples = Vec::with_capacity(sources.len());
    let mut insertion_orders = Vec::with_capacity(sources.len());
    let mut undersized = Vec::new();
    let mut total = 0usize;
    for (position, source) in sources.iter().enumerate() {
        let gold = source_gold_context(source)?;
        let mut rng = cfg.rng_for(position);
        let members = build_context_set(&gold.text, &pool, judge, cfg, &mut rng);
        total += members.len();
        if members.len() < cfg.target_size {
            undersized.push(SetDiagnostic {
                example_id: source.example_id.clone(),
                size: members.len(),
                short: members.len() < cfg.min_size,
            });
        }
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(&mut rng);
        let width = (members.len().max(1) - 1).to_string().len().max(2);
        let contexts: Vec<ContextItem> = order
            .iter()
            .enumerate()
            .map(|(slot, &m)| ContextItem::new(format!("c{slot:0width$}"), members[m].clone()))
            .collect();
        let gold_slot = order
            .iter()
            .position(|&m| m == 0)
            .expect("gold is a member");
        examples.push(Example {
            example_id: source.example_id.clone(),
            question: source.question.clone(),
            gold_ctx_id: Some(contexts[gold_slot].ctx_id.clone()),
            contexts,
            gold_doc_id: source.gold_doc_id.clone(),
        });
        insertion_orders.push(members);
    }
    let mean = if sources.is_empty() {
        0.0
    } else {
        total as f64 / sources.len() as f64
    };
    let report = BuildReport {
        examples: sources.len(),
        mean_set_size: (mean * 100.0).round() / 100.0,
        short_set_count: undersized.iter().filter(|d| d.short).count(),
        undersized,
        seed: cfg.seed,
        judge: judge.name().to_string(),
        target_size: cfg.target_size,
        min_size: cfg.min_size,
    };
    Ok(BuiltDataset {
        examples,
        insertion_orders,
        report,
    })
}
