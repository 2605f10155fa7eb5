use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pcas_core::corpus::{
    load_corpus, load_examples, validate, write_examples, Corpus, Example, ValidationReport,
};
use pcas_core::dataset::{build_dataset, judge_by_name, BuildConfig, BuildReport};
use pcas_core::evaluation::{
    evaluate_run, parse_qrels, parse_trec_run_tagged, render_report_jsonl, render_report_table,
    sweep, write_qrels, write_trec_run, MetricSpec, Qrels, ReportRow, Run, SweepRow,
};
use pcas_core::pipelines::{run_all, Composition, Method, MethodConfig, MethodResult};
use pcas_core::scoring::{
    keys, load_embeddings, EmbeddingScorer, HashEmbedder, LexicalIndex, LexicalScorer, Scorer,
    Similarity, DEFAULT_B, DEFAULT_K1,
};
use serde::Serialize;

use crate::config::ScorerKind;
use crate::UsageError;

pub const DEFAULT_HASH_DIM: usize = 64;

pub fn default_doc_metrics() -> Vec<MetricSpec> {
    vec![
        MetricSpec::recall(1),
        MetricSpec::recall(5),
        MetricSpec::map(5),
    ]
}

pub fn default_ctx_metrics() -> Vec<MetricSpec> {
    vec![MetricSpec::recall(1)]
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().replace(char::is_whitespace, "_"))
        .unwrap_or_else(|| "input".into())
}

// ---------------------------------------------------------------- index

pub fn cmd_index(corpus_path: &Path, k1: f64, b: f64, out_dir: &Path) -> anyhow::Result<PathBuf> {
    let corpus = load_corpus(corpus_path)?;
    let index = LexicalIndex::build(&corpus, k1, b)?;
    let dir = out_dir.join("indexes");
    ensure_dir(&dir)?;
    let path = dir.join(format!("{}_bm25_k1{k1}_b{b}.json", stem(corpus_path)));
    index.save(&path)?;
    Ok(path)
}

// ---------------------------------------------------------------- run

/// Everything one `run` or `sweep` invocation needs.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub methods: Vec<Method>,
    pub scorer: ScorerKind,
    pub corpus: PathBuf,
    pub examples: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Shared parameters; `method` is overwritten per run.
    pub config: MethodConfig,
    pub similarity: Similarity,
    pub hash_dim: usize,
    pub k1: f64,
    pub b: f64,
    pub seed: u64,
    /// Verify every result's structural invariants.
    pub check: bool,
}

impl RunPlan {
    pub fn new(
        corpus: impl Into<PathBuf>,
        examples: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        RunPlan {
            methods: Method::ALL.to_vec(),
            scorer: ScorerKind::Lexical,
            corpus: corpus.into(),
            examples: examples.into(),
            embeddings: None,
            index: None,
            out_dir: out_dir.into(),
            config: MethodConfig::default(),
            similarity: Similarity::Cosine,
            hash_dim: DEFAULT_HASH_DIM,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
            seed: 0,
            check: true,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.methods.is_empty() {
            return Err(UsageError::usage("no methods selected").into());
        }
        if self.scorer == ScorerKind::Embedding && self.embeddings.is_none() {
            return Err(UsageError::usage("the embedding scorer requires --embeddings").into());
        }
        if self.hash_dim == 0 {
            return Err(UsageError::usage("--hash-dim must be positive").into());
        }
        for &method in &self.methods {
            self.method_config(method).validate()?;
        }
        Ok(())
    }

    pub fn method_config(&self, method: Method) -> MethodConfig {
        MethodConfig {
            method,
            ..self.config.clone()
        }
    }

    pub fn scorer_label(&self) -> String {
        match self.scorer {
            ScorerKind::Lexical => "bm25".into(),
            ScorerKind::Embedding => format!("emb-{}", self.similarity),
            ScorerKind::Hash => format!("hash{}-{}", self.hash_dim, self.similarity),
        }
    }

    /// File stem shared by every output of one method run.
    pub fn run_stem(&self, method: Method) -> String {
        let cfg = self.method_config(method);
        let mut stem = format!(
            "{}_k{}_{}_s{}",
            cfg.tag(),
            cfg.k_out,
            self.scorer_label(),
            self.seed
        );
        if cfg.composition == Composition::VectorMean && method.composes_query() {
            stem.push_str("_mean");
        }
        stem
    }

    pub fn load_inputs(&self) -> anyhow::Result<(Corpus, Vec<Example>)> {
        Ok((load_corpus(&self.corpus)?, load_examples(&self.examples)?))
    }

    pub fn build_scorer(&self, corpus: &Corpus) -> anyhow::Result<Box<dyn Scorer>> {
        Ok(match self.scorer {
            ScorerKind::Lexical => {
                let index = match &self.index {
                    Some(path) => LexicalIndex::load(path)?,
                    None => LexicalIndex::build(corpus, self.k1, self.b)?,
                };
                Box::new(LexicalScorer::new(index))
            }
            ScorerKind::Hash => Box::new(EmbeddingScorer::hashed(
                corpus,
                HashEmbedder::new(self.hash_dim, self.seed),
                self.similarity,
            )?),
            ScorerKind::Embedding => {
                let path = self.embeddings.as_ref().expect("validated");
                Box::new(EmbeddingScorer::new(
                    load_embeddings(path, self.similarity)?,
                    corpus,
                    None,
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutputs {
    pub doc_runs: Vec<PathBuf>,
    pub ctx_runs: Vec<PathBuf>,
    pub result_logs: Vec<PathBuf>,
    pub doc_qrels: PathBuf,
    pub ctx_qrels: PathBuf,
}

fn write_results_log(results: &[MethodResult], path: &Path) -> anyhow::Result<()> {
    let mut text = String::new();
    for r in results {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Runs every planned method, then writes the TREC runs, qrels and result
/// logs in method order.
pub fn cmd_run(plan: &RunPlan) -> anyhow::Result<RunOutputs> {
    plan.validate()?;
    let (corpus, examples) = plan.load_inputs()?;
    let scorer = plan.build_scorer(&corpus)?;
    let mut computed = Vec::with_capacity(plan.methods.len());
    for &method in &plan.methods {
        let cfg = plan.method_config(method);
        let results = run_all(&examples, scorer.as_ref(), &cfg, plan.check)?;
        computed.push((method, cfg, results));
    }

    let dir = plan.out_dir.join("runs");
    ensure_dir(&dir)?;
    let examples_stem = stem(&plan.examples);
    let mut out = RunOutputs {
        doc_qrels: dir.join(format!("qrels_{examples_stem}.docs.txt")),
        ctx_qrels: dir.join(format!("qrels_{examples_stem}.ctx.txt")),
        ..RunOutputs::default()
    };
    write_qrels(&Qrels::documents(&examples), &out.doc_qrels)?;
    write_qrels(&Qrels::contexts(&examples), &out.ctx_qrels)?;
    for (method, cfg, results) in computed {
        let stem = plan.run_stem(method);
        let doc_path = dir.join(format!("{stem}.docs.trec"));
        write_trec_run(&Run::documents(&results), &cfg.tag(), &doc_path)?;
        out.doc_runs.push(doc_path);
        if method.predicts_context() {
            let ctx_path = dir.join(format!("{stem}.ctx.trec"));
            write_trec_run(&Run::contexts(&results), &cfg.tag(), &ctx_path)?;
            out.ctx_runs.push(ctx_path);
        }
        let log = dir.join(format!("{stem}.results.jsonl"));
        write_results_log(&results, &log)?;
        out.result_logs.push(log);
    }
    Ok(out)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub runs: Vec<PathBuf>,
    pub ctx_runs: Vec<PathBuf>,
    pub qrels: PathBuf,
    pub ctx_qrels: Option<PathBuf>,
    pub doc_metrics: Vec<MetricSpec>,
    pub ctx_metrics: Vec<MetricSpec>,
    pub out_dir: PathBuf,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutputs {
    pub rows: Vec<ReportRow>,
    pub table: PathBuf,
    pub jsonl: PathBuf,
}

fn tagged(path: &Path) -> anyhow::Result<(String, Run)> {
    let parsed = parse_trec_run_tagged(path)?;
    let tag = parsed.tag.unwrap_or_else(|| stem(path));
    Ok((tag, parsed.run))
}

/// Evaluates document runs (and context runs, matched by tag) and writes
/// the methods × metrics table plus its JSONL form.
pub fn cmd_eval(plan: &EvalPlan) -> anyhow::Result<EvalOutputs> {
    if plan.runs.is_empty() {
        return Err(UsageError::usage("eval needs at least one --run").into());
    }
    if !plan.ctx_runs.is_empty() && plan.ctx_qrels.is_none() {
        return Err(UsageError::usage("--ctx-run needs --ctx-qrels").into());
    }
    let qrels = parse_qrels(&plan.qrels)?;
    let ctx_qrels = plan.ctx_qrels.as_ref().map(parse_qrels).transpose()?;

    let mut ctx_by_tag = BTreeMap::new();
    for path in &plan.ctx_runs {
        let (tag, run) = tagged(path)?;
        if ctx_by_tag.insert(tag.clone(), run).is_some() {
            return Err(
                UsageError::usage(format!("two context runs share the tag {tag:?}")).into(),
            );
        }
    }
    let mut rows = Vec::with_capacity(plan.runs.len());
    for path in &plan.runs {
        let (tag, run) = tagged(path)?;
        let contexts = match (ctx_by_tag.remove(&tag), &ctx_qrels) {
            (Some(ctx_run), Some(cq)) => Some(evaluate_run(&ctx_run, cq, &plan.ctx_metrics)),
            _ => None,
        };
        rows.push(ReportRow {
            method: tag,
            documents: Some(evaluate_run(&run, &qrels, &plan.doc_metrics)),
            contexts,
        });
    }
    if let Some(tag) = ctx_by_tag.keys().next() {
        return Err(UsageError::usage(format!(
            "context run {tag:?} has no document run with the same tag"
        ))
        .into());
    }

    let dir = plan.out_dir.join("reports");
    ensure_dir(&dir)?;
    let table = dir.join(format!("{}.txt", plan.name));
    let jsonl = dir.join(format!("{}.jsonl", plan.name));
    write_text(
        &table,
        &render_report_table(&rows, &plan.doc_metrics, &plan.ctx_metrics),
    )?;
    write_text(
        &jsonl,
        &render_report_jsonl(&rows, &plan.doc_metrics, &plan.ctx_metrics),
    )?;
    Ok(EvalOutputs { rows, table, jsonl })
}

// ---------------------------------------------------------------- sweep

pub fn default_lambdas() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

pub fn default_beams() -> Vec<usize> {
    vec![1, 3, 5, 10]
}

pub fn render_sweep(rows: &[SweepRow], metric: &MetricSpec) -> String {
    let mut out = format!("lambda\tbeam\t{metric}\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{:.6}\n", r.lambda, r.beam, r.value));
    }
    out
}

/// PCAS over the λ × beam grid; rows are ordered best first.
pub fn cmd_sweep(
    plan: &RunPlan,
    lambdas: &[f64],
    beams: &[usize],
    metric: MetricSpec,
) -> anyhow::Result<(Vec<SweepRow>, PathBuf)> {
    let mut base = plan.method_config(Method::Pcas);
    if lambdas.is_empty() || beams.is_empty() {
        return Err(pcas_core::Error::EmptyGrid.into());
    }
    for &lambda in lambdas {
        for &beam in beams {
            base.lambda = lambda;
            base.beam = beam;
            base.validate()?;
        }
    }
    let probe = RunPlan {
        methods: vec![Method::Pcas],
        ..plan.clone()
    };
    probe.validate()?;
    let (corpus, examples) = plan.load_inputs()?;
    let scorer = plan.build_scorer(&corpus)?;
    let rows = sweep(
        &examples,
        scorer.as_ref(),
        &plan.method_config(Method::Pcas),
        lambdas,
        beams,
        metric,
    )?;

    let dir = plan.out_dir.join("reports");
    ensure_dir(&dir)?;
    let path = dir.join(format!(
        "sweep_{}_{}_k{}_s{}.tsv",
        metric.label().replace('@', ""),
        plan.scorer_label(),
        plan.config.k_out,
        plan.seed
    ));
    write_text(&path, &render_sweep(&rows, &metric))?;
    Ok((rows, path))
}

// ---------------------------------------------------------------- build-dataset

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOutputs {
    pub examples: PathBuf,
    pub report: PathBuf,
    pub build_report: BuildReport,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a BuildReport,
    check_against: pcas_core::dataset::CheckAgainst,
    max_attempts_per_slot: usize,
    /// Per example, contexts in the order they were accepted.
    insertion_orders: BTreeMap<&'a str, &'a [String]>,
}

pub fn cmd_build_dataset(
    source: &Path,
    judge_name: &str,
    cfg: &BuildConfig,
    out_dir: &Path,
) -> anyhow::Result<DatasetOutputs> {
    let judge = judge_by_name(judge_name)?;
    let sources = load_examples(source)?;
    let built = build_dataset(&sources, judge.as_ref(), cfg)?;

    let dir = out_dir.join("datasets");
    ensure_dir(&dir)?;
    let name = format!(
        "{}_{}_t{}_s{}",
        stem(source),
        judge.name(),
        cfg.target_size,
        cfg.seed
    );
    let examples_path = dir.join(format!("{name}.jsonl"));
    let report_path = dir.join(format!("{name}.report.json"));
    write_examples(&built.examples, &examples_path)?;
    let file = ReportFile {
        report: &built.report,
        check_against: cfg.check_against,
        max_attempts_per_slot: cfg.max_attempts_per_slot,
        insertion_orders: built
            .examples
            .iter()
            .zip(&built.insertion_orders)
            .map(|(e, o)| (e.example_id.as_str(), o.as_slice()))
            .collect(),
    };
    write_json(&report_path, &file)?;
    Ok(DatasetOutputs {
        examples: examples_path,
        report: report_path,
        build_report: built.report,
    })
}

// ---------------------------------------------------------------- compose-queries

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComposedRecord {
    pub composed_id: String,
    pub text: String,
}

/// Every text-mode composed query the selected methods could issue. B3 gets
/// one record per context since its choice is made at run time. With
/// `components`, question and context texts are listed under their `q:`
/// and `c:` keys as well.
pub fn composed_queries(
    examples: &[Example],
    methods: &[Method],
    separator: &str,
    components: bool,
) -> anyhow::Result<Vec<ComposedRecord>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push =
        |out: &mut Vec<ComposedRecord>, composed_id: String, text: String| -> anyhow::Result<()> {
            if !seen.insert(composed_id.clone()) {
                return Err(pcas_core::Error::DuplicateId {
                    kind: "composed query",
                    id: composed_id,
                }
                .into());
            }
            out.push(ComposedRecord { composed_id, text });
            Ok(())
        };
    let join = |parts: &[&str]| parts.join(separator);
    for ex in examples {
        let id = ex.example_id.as_str();
        if components {
            push(&mut out, keys::question(id), ex.question.clone())?;
            for c in &ex.contexts {
                push(&mut out, keys::context(id, &c.ctx_id), c.text.clone())?;
            }
        }
        for &method in methods {
            match method {
                Method::Or => {
                    let gold =
                        ex.gold_context()
                            .ok_or_else(|| pcas_core::Error::MissingGoldContext {
                                example_id: id.to_string(),
                            })?;
                    push(
                        &mut out,
                        keys::composed("OR", id, None),
                        join(&[&ex.question, &gold.text]),
                    )?;
                }
                Method::B1 => {
                    let mut parts = vec![ex.question.as_str()];
                    parts.extend(ex.contexts.iter().map(|c| c.text.as_str()));
                    push(&mut out, keys::composed("B1", id, None), join(&parts))?;
                }
                Method::B3 => {
                    for c in &ex.contexts {
                        push(
                            &mut out,
                            keys::composed("B3", id, Some(&c.ctx_id)),
                            join(&[&ex.question, &c.text]),
                        )?;
                    }
                }
                Method::B2 | Method::Pcas => {}
            }
        }
    }
    Ok(out)
}

pub fn cmd_compose_queries(
    examples_path: &Path,
    methods: &[Method],
    separator: &str,
    components: bool,
    out_dir: &Path,
) -> anyhow::Result<(usize, PathBuf)> {
    let examples = load_examples(examples_path)?;
    let records = composed_queries(&examples, methods, separator, components)?;
    let dir = out_dir.join("queries");
    ensure_dir(&dir)?;
    let names: Vec<&str> = methods.iter().map(|m| m.as_str()).collect();
    let path = dir.join(format!("{}_{}.jsonl", stem(examples_path), names.join("-")));
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_text(&path, &text)?;
    Ok((records.len(), path))
}

// ---------------------------------------------------------------- validate

pub fn cmd_validate(
    corpus: &Path,
    examples: &Path,
    out_dir: &Path,
) -> anyhow::Result<(ValidationReport, PathBuf)> {
    let report = validate(&load_corpus(corpus)?, &load_examples(examples)?);
    let dir = out_dir.join("reports");
    ensure_dir(&dir)?;
    let path = dir.join(format!("validation_{}.json", stem(examples)));
    write_json(&path, &report)?;
    Ok((report, path))
}
