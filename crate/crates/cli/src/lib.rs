//! Batch front end for context-aware passage retrieval experiments.
//!
//! `pcas <command>` builds indexes, runs the retrieval methods, evaluates
//! TREC runs, sweeps PCAS parameters, builds context-set datasets, exports
//! composed queries and validates inputs. Outputs land under one directory
//! in `runs/`, `reports/`, `indexes/`, `datasets/` and `queries/`.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use pcas_core::dataset::BuildConfig;
use pcas_core::evaluation::MetricSpec;
use pcas_core::pipelines::{Method, MethodConfig};
use pcas_core::scoring::{Similarity, DEFAULT_B, DEFAULT_K1};

pub use commands::*;
pub use config::*;

/// Argument and configuration errors that do not come from the library.
#[derive(Debug)]
pub struct UsageError {
    code: &'static str,
    message: String,
}

impl UsageError {
    pub fn usage(message: impl Into<String>) -> Self {
        UsageError {
            code: "E_USAGE",
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        UsageError {
            code: "E_CONFIG",
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for UsageError {}

/// Machine-readable code of the first coded error in the chain.
pub fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<pcas_core::Error>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<UsageError>() {
            return e.code;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "E_IO";
        }
    }
    "E_INTERNAL"
}

/// `error[CODE]: message` on a single line.
pub fn error_line(err: &anyhow::Error) -> String {
    // causes already spelled out by their parent's message are skipped
    let mut text = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    format!(
        "error[{}]: {}",
        error_code(err),
        text.replace(['\n', '\r'], " ")
    )
}

#[derive(Debug, Parser)]
#[command(
    name = "pcas",
    version,
    about = "Context-aware passage retrieval experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and save a BM25 index over a corpus.
    Index {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Run retrieval methods and write TREC runs, qrels and result logs.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        method: MethodArgs,
        /// Skip per-result invariant checks.
        #[arg(long)]
        no_check: bool,
    },
    /// Evaluate run files against qrels and write the report table.
    Eval {
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// Evaluate PCAS over a λ × beam grid.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Expand single-context examples into context-set examples.
    BuildDataset {
        #[command(flatten)]
        build: BuildArgs,
    },
    /// Export the composed query texts of the selected methods.
    ComposeQueries {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        method: MethodArgs,
        /// Also list question and context texts under their q:/c: keys.
        #[arg(long)]
        include_components: bool,
    },
    /// Report examples whose gold document is missing, duplicated context
    /// texts and empty context sets.
    Validate {
        #[command(flatten)]
        input: InputArgs,
    },
}

fn required<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| UsageError::usage(format!("missing required --{flag}")).into())
}

fn parse_metrics(names: &[String], default: Vec<MetricSpec>) -> anyhow::Result<Vec<MetricSpec>> {
    if names.is_empty() {
        return Ok(default);
    }
    Ok(names
        .iter()
        .map(|n| n.parse())
        .collect::<Result<_, pcas_core::Error>>()?)
}

fn method_config(m: &MethodArgs) -> MethodConfig {
    let d = MethodConfig::default();
    MethodConfig {
        method: d.method,
        k_out: m.k.unwrap_or(d.k_out),
        beam: m.beam.unwrap_or(d.beam),
        lambda: m.lambda.unwrap_or(d.lambda),
        normalize_combination: m.normalize_combination.unwrap_or(d.normalize_combination),
        composition: m.composition.unwrap_or(d.composition),
        separator: m.separator.clone().unwrap_or(d.separator),
        b2_context_depth: m.b2_depth.unwrap_or(d.b2_context_depth),
    }
}

fn run_plan(
    input: InputArgs,
    scorer: ScorerArgs,
    method: MethodArgs,
    out_dir: PathBuf,
) -> anyhow::Result<RunPlan> {
    let mut plan = RunPlan::new(
        required(input.corpus, "corpus")?,
        required(input.examples, "examples")?,
        out_dir,
    );
    if !method.methods.is_empty() {
        plan.methods = method.methods.clone();
    }
    plan.config = method_config(&method);
    plan.scorer = scorer.scorer.unwrap_or(ScorerKind::Lexical);
    plan.embeddings = scorer.embeddings;
    plan.index = scorer.index;
    plan.similarity = scorer.similarity.unwrap_or(Similarity::Cosine);
    plan.hash_dim = scorer.hash_dim.unwrap_or(DEFAULT_HASH_DIM);
    plan.k1 = scorer.k1.unwrap_or(DEFAULT_K1);
    plan.b = scorer.b.unwrap_or(DEFAULT_B);
    plan.seed = scorer.seed.unwrap_or(0);
    Ok(plan)
}

/// Executes a parsed command line; human-readable progress goes to stdout.
pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let file = ConfigFile::for_common(&cli.common)?;
    let out_dir = resolve_out_dir(&cli.common, &file);
    match cli.command {
        Command::Index { input, scorer } => {
            let input = input.overlay(file.input);
            let scorer = scorer.overlay(file.scorer);
            let path = cmd_index(
                &required(input.corpus, "corpus")?,
                scorer.k1.unwrap_or(DEFAULT_K1),
                scorer.b.unwrap_or(DEFAULT_B),
                &out_dir,
            )?;
            println!("index {}", path.display());
        }
        Command::Run {
            input,
            scorer,
            method,
            no_check,
        } => {
            let mut plan = run_plan(
                input.overlay(file.input),
                scorer.overlay(file.scorer),
                method.overlay(file.method),
                out_dir,
            )?;
            plan.check = !no_check;
            let out = cmd_run(&plan)?;
            for p in out.doc_runs.iter().chain(&out.ctx_runs) {
                println!("run {}", p.display());
            }
            println!("qrels {}", out.doc_qrels.display());
            println!("qrels {}", out.ctx_qrels.display());
        }
        Command::Eval { eval, metrics } => {
            let eval = eval.overlay(file.eval);
            let metrics = metrics.overlay(file.metrics);
            let plan = EvalPlan {
                runs: eval.runs,
                ctx_runs: eval.ctx_runs,
                qrels: required(eval.qrels, "qrels")?,
                ctx_qrels: eval.ctx_qrels,
                doc_metrics: parse_metrics(&metrics.metrics, default_doc_metrics())?,
                ctx_metrics: parse_metrics(&metrics.ctx_metrics, default_ctx_metrics())?,
                out_dir,
                name: eval.name.unwrap_or_else(|| "report".into()),
            };
            let out = cmd_eval(&plan)?;
            print!("{}", std::fs::read_to_string(&out.table)?);
            println!("report {}", out.table.display());
        }
        Command::Sweep {
            input,
            scorer,
            method,
            grid,
        } => {
            let grid = grid.overlay(file.grid);
            let plan = run_plan(
                input.overlay(file.input),
                scorer.overlay(file.scorer),
                method.overlay(file.method),
                out_dir,
            )?;
            let lambdas = if grid.lambdas.is_empty() {
                default_lambdas()
            } else {
                grid.lambdas
            };
            let beams = if grid.beams.is_empty() {
                default_beams()
            } else {
                grid.beams
            };
            let metric = match grid.sweep_metric {
                Some(name) => name.parse()?,
                None => MetricSpec::recall(1),
            };
            let (rows, path) = cmd_sweep(&plan, &lambdas, &beams, metric)?;
            let best = rows[0];
            println!(
                "best lambda={} beam={} {}={:.6}",
                best.lambda, best.beam, metric, best.value
            );
            println!("sweep {}", path.display());
        }
        Command::BuildDataset { build } => {
            let build = build.overlay(file.build);
            let d = BuildConfig::default();
            let cfg = BuildConfig {
                target_size: build.target_size.unwrap_or(d.target_size),
                min_size: build.min_size.unwrap_or(d.min_size),
                max_attempts_per_slot: build.max_attempts.unwrap_or(d.max_attempts_per_slot),
                seed: build.seed.unwrap_or(d.seed),
                check_against: build.check_against.map_or(d.check_against, Into::into),
            };
            let judge = build.judge.unwrap_or_else(|| "heuristic".into());
            let out =
                cmd_build_dataset(&required(build.source, "source")?, &judge, &cfg, &out_dir)?;
            let r = &out.build_report;
            println!(
                "examples={} mean_set_size={:.2} short_sets={} undersized={}",
                r.examples,
                r.mean_set_size,
                r.short_set_count,
                r.undersized.len()
            );
            for d in r.undersized.iter().filter(|d| d.short) {
                println!("short {} size={}", d.example_id, d.size);
            }
            println!("dataset {}", out.examples.display());
            println!("report {}", out.report.display());
        }
        Command::ComposeQueries {
            input,
            method,
            include_components,
        } => {
            let input = input.overlay(file.input);
            let method = method.overlay(file.method);
            let methods = if method.methods.is_empty() {
                vec![Method::Or, Method::B1, Method::B3]
            } else {
                method.methods.clone()
            };
            let separator = method
                .separator
                .unwrap_or_else(|| MethodConfig::default().separator);
            let (n, path) = cmd_compose_queries(
                &required(input.examples, "examples")?,
                &methods,
                &separator,
                include_components,
                &out_dir,
            )?;
            println!("{n} composed queries");
            println!("manifest {}", path.display());
        }
        Command::Validate { input } => {
            let input = input.overlay(file.input);
            let (report, path) = cmd_validate(
                &required(input.corpus, "corpus")?,
                &required(input.examples, "examples")?,
                &out_dir,
            )?;
            for f in &report.findings {
                println!("{}\t{:?}\t{}", f.example_id, f.kind, f.detail);
            }
            println!("{} findings", report.findings.len());
            println!("report {}", path.display());
        }
    }
    Ok(())
}

/// Parses `args` and executes; returns the process exit code. Errors are
/// printed to stderr as a single `error[CODE]: message` line.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first}");
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
