//! Flag groups. Every group is also a section of the optional TOML config
//! file; a flag given on the command line wins over the file's value.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use pcas_core::dataset::CheckAgainst;
use pcas_core::pipelines::{Composition, Method};
use pcas_core::scoring::Similarity;
use serde::Deserialize;

use crate::UsageError;

/// Environment variable consulted when neither `--out` nor the config sets
/// an output directory.
pub const OUT_DIR_ENV: &str = "PCAS_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lexical,
    Embedding,
    Hash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeCheck {
    GoldOnly,
    AllAccepted,
}

impl From<JudgeCheck> for CheckAgainst {
    fn from(c: JudgeCheck) -> Self {
        match c {
            JudgeCheck::GoldOnly => CheckAgainst::GoldOnly,
            JudgeCheck::AllAccepted => CheckAgainst::AllAccepted,
        }
    }
}

/// Overlays `file` under `self`: fields unset on the command line take the
/// file's value.
pub trait Overlay {
    fn overlay(self, file: Self) -> Self;
}

macro_rules! overlay {
    ($ty:ty { $($opt:ident),* ; $($list:ident),* }) => {
        impl Overlay for $ty {
            fn overlay(self, file: Self) -> Self {
                Self {
                    $($opt: self.$opt.or(file.$opt),)*
                    $($list: if self.$list.is_empty() { file.$list } else { self.$list },)*
                }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputArgs {
    /// Corpus file (JSONL, one document per line).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Examples file (JSONL, one example per line).
    #[arg(long)]
    pub examples: Option<PathBuf>,
}
overlay!(InputArgs { corpus, examples ; });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerArgs {
    /// Relevance function behind every method.
    #[arg(long, value_enum)]
    pub scorer: Option<ScorerKind>,
    /// Precomputed embeddings (binary PCASEMB1 or JSONL); required by the
    /// embedding scorer.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Prebuilt lexical index; built from the corpus when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// dot or cosine, for the embedding and hash scorers.
    #[arg(long)]
    pub similarity: Option<Similarity>,
    /// Dimension of hash embeddings.
    #[arg(long)]
    pub hash_dim: Option<usize>,
    /// BM25 term saturation.
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 length normalization.
    #[arg(long)]
    pub b: Option<f64>,
    /// Seed of the hash embedding provider.
    #[arg(long)]
    pub seed: Option<u64>,
}
overlay!(ScorerArgs { scorer, embeddings, index, similarity, hash_dim, k1, b, seed ; });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodArgs {
    /// Method to run; repeat for several. Defaults to all five.
    #[arg(long = "method")]
    #[serde(default)]
    pub methods: Vec<Method>,
    /// PCAS weight of the question score, in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// PCAS candidate documents re-scored with contexts.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Length of every output document ranking.
    #[arg(long)]
    pub k: Option<usize>,
    /// Min-max normalize both PCAS score components within the beam.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize_combination: Option<bool>,
    /// How OR, B1 and B3 combine question and contexts: text or vector-mean.
    #[arg(long)]
    pub composition: Option<Composition>,
    /// Joins question and contexts in text composition.
    #[arg(long)]
    pub separator: Option<String>,
    /// Number of question-ranked documents B2 scores contexts against.
    #[arg(long)]
    pub b2_depth: Option<usize>,
}
overlay!(MethodArgs { lambda, beam, k, normalize_combination, composition, separator, b2_depth ; methods });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricArgs {
    /// Document metric such as recall@1 or map@5; repeatable.
    #[arg(long = "metric")]
    #[serde(default)]
    pub metrics: Vec<String>,
    /// Context metric; repeatable.
    #[arg(long = "ctx-metric")]
    #[serde(default)]
    pub ctx_metrics: Vec<String>,
}
overlay!(MetricArgs { ; metrics, ctx_metrics });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridArgs {
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Comma-separated beam sizes.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub beams: Vec<usize>,
    /// Metric the sweep ranks grid points by.
    #[arg(long)]
    pub sweep_metric: Option<String>,
}
overlay!(GridArgs { sweep_metric ; lambdas, beams });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildArgs {
    /// Single-context source examples.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// permissive, heuristic or strict.
    #[arg(long)]
    pub judge: Option<String>,
    /// Contexts per built set, gold included.
    #[arg(long)]
    pub target_size: Option<usize>,
    /// Sets smaller than this are reported as short.
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Consecutive rejected draws tolerated while filling one slot.
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Whether a candidate is judged against the gold context or every accepted one.
    #[arg(long, value_enum)]
    pub check_against: Option<JudgeCheck>,
    /// Seed of the sampling stream.
    #[arg(long)]
    pub seed: Option<u64>,
}
overlay!(BuildArgs { source, judge, target_size, min_size, max_attempts, check_against, seed ; });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// Document run file; repeat for a multi-method report.
    #[arg(long = "run")]
    #[serde(default)]
    pub runs: Vec<PathBuf>,
    /// Context run file, matched to a document run by its tag.
    #[arg(long = "ctx-run")]
    #[serde(default)]
    pub ctx_runs: Vec<PathBuf>,
    /// Document qrels.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Context qrels.
    #[arg(long)]
    pub ctx_qrels: Option<PathBuf>,
    /// Stem of the report files.
    #[arg(long)]
    pub name: Option<String>,
}
overlay!(EvalArgs { qrels, ctx_qrels, name ; runs, ctx_runs });

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file whose sections ([input], [scorer], [method], [metrics],
    /// [grid], [build], [eval]) supply defaults for the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; falls back to the config file, then $PCAS_OUT_DIR,
    /// then ./pcas-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub input: InputArgs,
    #[serde(default)]
    pub scorer: ScorerArgs,
    #[serde(default)]
    pub method: MethodArgs,
    #[serde(default)]
    pub metrics: MetricArgs,
    #[serde(default)]
    pub grid: GridArgs,
    #[serde(default)]
    pub build: BuildArgs,
    #[serde(default)]
    pub eval: EvalArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.to_string().replace('\n', " ");
            UsageError::config(format!("{}: {}", path.display(), msg.trim())).into()
        })
    }

    pub fn for_common(common: &CommonArgs) -> anyhow::Result<Self> {
        match &common.config {
            Some(path) => Self::load(path),
            None => Ok(Self::default()),
        }
    }
}

pub fn resolve_out_dir(common: &CommonArgs, file: &ConfigFile) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pcas-out"))
}
