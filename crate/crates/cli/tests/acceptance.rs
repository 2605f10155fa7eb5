//! Acceptance suite: one numbered criterion per check, each printing a
//! single PASS/FAIL line. Runs as a plain binary so the lines reach the
//! terminal under `cargo test`; exits nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::*;
use pcas_cli::{cmd_build_dataset, cmd_eval, cmd_index, cmd_run, EvalPlan, RunPlan, ScorerKind};
use pcas_core::corpus::{
    load_corpus, load_examples, write_corpus, write_examples, ContextItem, Corpus, Example,
};
use pcas_core::dataset::BuildConfig;
use pcas_core::evaluation::{
    map_at_k, parse_trec_run, recall_at_k, write_trec_run, MetricSpec, Qrels, Run,
};
use pcas_core::pipelines::{run_all, run_method, Method, MethodConfig};
use pcas_core::scoring::{
    read_embeddings_binary, select_top_k, top_k, write_embeddings_binary, EmbeddingScorer,
    EmbeddingTable, HashEmbedder, LexicalIndex, LexicalScorer, Query, RankedList, Scored, Scorer,
    Similarity,
};
use pcas_core::synthetic::{generate, SyntheticSpec};
use pcas_core::Result;
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lexical(corpus: &Corpus) -> LexicalScorer {
    LexicalScorer::new(LexicalIndex::build(corpus, 1.2, 0.75).unwrap())
}

fn hashed(corpus: &Corpus, seed: u64) -> EmbeddingScorer {
    EmbeddingScorer::hashed(corpus, HashEmbedder::new(24, seed), Similarity::Cosine).unwrap()
}

fn pairs(list: &RankedList) -> Vec<(String, f64)> {
    list.items()
        .iter()
        .map(|s| (s.id.clone(), s.score))
        .collect()
}

fn pcas_cfg(lambda: f64, beam: usize, k_out: usize) -> MethodConfig {
    MethodConfig {
        lambda,
        beam,
        k_out,
        ..MethodConfig::for_method(Method::Pcas)
    }
}

// 1 --------------------------------------------------------------------------

fn metric_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(101);
    let mut comparisons = 0;
    for _ in 0..200 {
        let n_queries = r.random_range(1..=25);
        let n_items = r.random_range(1..=20);
        let mut run = Run::default();
        let mut qrels = Qrels::default();
        let mut rankings = BTreeMap::new();
        let mut gold = BTreeMap::new();
        for q in 0..n_queries {
            let qid = format!("q{q:02}");
            let g = format!("i{:02}", r.random_range(0..n_items));
            qrels.insert(qid.clone(), g.clone(), 1);
            gold.insert(qid.clone(), g);
            // some queries are missing from the run entirely
            if r.random_range(0..8) == 0 {
                continue;
            }
            let mut items: Vec<String> = (0..n_items).map(|i| format!("i{i:02}")).collect();
            items.shuffle(&mut r);
            items.truncate(r.random_range(0..=n_items));
            let scored = items
                .iter()
                .enumerate()
                .map(|(rank, id)| Scored::new(id.clone(), (n_items - rank) as f64))
                .collect();
            run.insert(qid.clone(), RankedList::from_ranked(scored).unwrap());
            rankings.insert(qid, items);
        }
        for k in [1, 3, 5, 10, 20] {
            let rec = recall_at_k(&run, &qrels, k).aggregate;
            let map = map_at_k(&run, &qrels, k).aggregate;
            let (want_rec, want_map) = (
                brute_recall(&rankings, &gold, k),
                brute_map(&rankings, &gold, k),
            );
            ensure(rec == want_rec, || {
                format!("recall@{k}: {rec} vs {want_rec}")
            })?;
            ensure(map == want_map, || format!("map@{k}: {map} vs {want_map}"))?;
            comparisons += 2;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "200 fixtures, {comparisons} comparisons, max |error| 0, {secs:.2}s"
    ))
}

// 2 --------------------------------------------------------------------------

/// Serves fixed scores so `top_k` can be driven with arbitrary ties.
struct TableScorer {
    ids: Vec<String>,
    scores: HashMap<String, f64>,
}

impl Scorer for TableScorer {
    fn name(&self) -> &str {
        "table"
    }

    fn document_ids(&self) -> &[String] {
        &self.ids
    }

    fn score_document(&self, _query: &Query, doc_id: &str) -> Result<f64> {
        Ok(self.scores[doc_id])
    }

    fn score_contexts(&self, _question: &Query, contexts: &[Query]) -> Result<Vec<f64>> {
        Ok(vec![0.0; contexts.len()])
    }
}

fn ranking_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(202);
    let mut tied_sets = 0;
    for _ in 0..500 {
        let n = r.random_range(1..=50);
        let levels = r.random_range(1..=6);
        let items: Vec<(String, f64)> = (0..n)
            .map(|i| {
                let level = r.random_range(0..levels) as f64;
                // -0.0 and 0.0 must tie as well
                let score = if level == 0.0 && r.random_range(0..2) == 0 {
                    -0.0
                } else {
                    level * 0.5
                };
                (format!("x{:03}", (i * 37) % 1000), score)
            })
            .collect();
        let distinct: BTreeSet<u64> = items.iter().map(|(_, s)| (s + 0.0).to_bits()).collect();
        if distinct.len() < items.len() {
            tied_sets += 1;
        }
        let k = r.random_range(1..=60);
        let want: Vec<(String, f64)> = brute_top(
            items.iter().map(|(id, s)| (id.clone(), s + 0.0)).collect(),
            k,
        );

        let got = select_top_k(items.iter().map(|(id, s)| Scored::new(id.clone(), *s)), k).unwrap();
        ensure(pairs(&got) == want, || {
            format!("select_top_k differs on n={n} k={k}")
        })?;

        let scorer = TableScorer {
            ids: items.iter().map(|(id, _)| id.clone()).collect(),
            scores: items.iter().cloned().collect(),
        };
        let candidates: Vec<&str> = scorer.ids.iter().map(String::as_str).collect();
        let got = top_k(&scorer, &Query::text("q", ""), &candidates, k).unwrap();
        ensure(pairs(&got) == want, || {
            format!("top_k differs on n={n} k={k}")
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "500 sets ({tied_sets} with ties), exact, {secs:.2}s"
    ))
}

// 3 --------------------------------------------------------------------------

fn pcas_degeneracies() -> Result<String, String> {
    let mut r = rng(303);
    let mut checked = 0;
    for i in 0..100 {
        let (corpus, ex) = random_fixture(&mut r, 10, 10);
        let lex = lexical(&corpus);
        let hash = hashed(&corpus, i);
        for scorer in [&lex as &dyn Scorer, &hash] {
            let q_top = question_ranking(&ex, scorer, 5);

            // (a) λ = 1 keeps the question-only winner
            let res = run_method(&ex, scorer, &pcas_cfg(1.0, 5, 5)).unwrap();
            ensure(res.ranked_docs.first().unwrap().id == q_top[0].0, || {
                format!("(a) fixture {i} {}", scorer.name())
            })?;

            // (b) beam = 1: question-only top doc and its best context
            let res = run_method(&ex, scorer, &pcas_cfg(0.6, 1, 5)).unwrap();
            ensure(res.ranked_docs.first().unwrap().id == q_top[0].0, || {
                format!("(b) doc, fixture {i} {}", scorer.name())
            })?;
            let pred = res.predicted_context.unwrap();
            ensure(
                (pred.id.clone(), pred.score) == b2_context(&ex, scorer),
                || format!("(b) context, fixture {i} {}", scorer.name()),
            )?;

            // (c) beam = K: same top-K set as the question-only ranking, so
            // Recall@K equals B2's
            let k = 5;
            let pcas = run_method(&ex, scorer, &pcas_cfg(0.6, k, k)).unwrap();
            let b2 = run_method(&ex, scorer, &MethodConfig::for_method(Method::B2)).unwrap();
            let set = |l: &RankedList| l.ids().map(str::to_string).collect::<BTreeSet<_>>();
            ensure(set(&pcas.ranked_docs) == set(&b2.ranked_docs), || {
                format!("(c) top-{k} sets differ, fixture {i} {}", scorer.name())
            })?;
            let qrels = Qrels::documents(std::slice::from_ref(&ex));
            let recall = |res| recall_at_k(&Run::documents(&[res]), &qrels, k).aggregate;
            ensure(recall(pcas) == recall(b2), || {
                format!("(c) recall, fixture {i}")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "100 fixtures x {{bm25, hash}}: {checked}/200 satisfy (a), (b), (c)"
    ))
}

// 4 --------------------------------------------------------------------------

fn pcas_brute_force() -> Result<String, String> {
    let mut r = rng(404);
    let mut cases = 0;
    for i in 0..100 {
        let (corpus, ex) = random_fixture(&mut r, 10, 10);
        let lex = lexical(&corpus);
        let hash = hashed(&corpus, i);
        for scorer in [&lex as &dyn Scorer, &hash] {
            for lambda in [0.25, 0.5, 0.6, 0.75] {
                for beam in [1, 3, 5] {
                    let cfg = pcas_cfg(lambda, beam, beam);
                    let got = run_method(&ex, scorer, &cfg).unwrap();
                    let want = pcas_oracle(&ex, scorer, lambda, beam);
                    ensure(pairs(&got.ranked_docs) == want.docs, || {
                        format!(
                            "docs differ: fixture {i} {} λ={lambda} beam={beam}",
                            scorer.name()
                        )
                    })?;
                    let pred = got.predicted_context.unwrap();
                    ensure((pred.id, pred.score) == want.context, || {
                        format!(
                            "context differs: fixture {i} {} λ={lambda} beam={beam}",
                            scorer.name()
                        )
                    })?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} (fixture, scorer, λ, beam) cases identical to pair enumeration"
    ))
}

// 5 --------------------------------------------------------------------------

fn separability() -> Result<String, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/separability");
    let corpus = load_corpus(dir.join("corpus.jsonl")).map_err(|e| e.to_string())?;
    let examples = load_examples(dir.join("examples.jsonl")).map_err(|e| e.to_string())?;
    let scorer = lexical(&corpus);
    let naive = NaiveBm25::from_corpus(&corpus);
    let qrels = Qrels::documents(&examples);
    let gold: BTreeMap<String, String> = examples
        .iter()
        .map(|e| (e.example_id.clone(), e.gold_doc_id.clone()))
        .collect();

    let library = |cfg: MethodConfig| {
        let run = Run::documents(&run_all(&examples, &scorer, &cfg, true).unwrap());
        (
            MetricSpec::recall(1).compute(&run, &qrels).aggregate,
            MetricSpec::map(5).compute(&run, &qrels).aggregate,
        )
    };
    let oracle = |rank: &dyn Fn(&Example) -> Vec<(String, f64)>| {
        let rankings: BTreeMap<String, Vec<String>> = examples
            .iter()
            .map(|e| {
                (
                    e.example_id.clone(),
                    rank(e).into_iter().map(|(d, _)| d).collect(),
                )
            })
            .collect();
        (
            brute_recall(&rankings, &gold, 1),
            brute_map(&rankings, &gold, 5),
        )
    };

    let b1 = oracle(&|e| naive.rank(&b1_text(e), 5));
    let b2 = oracle(&|e| naive.rank(&e.question, 5));
    let b3 = oracle(&|e| {
        let ctx = e.context(&b3_context_lexical(e).0).unwrap();
        naive.rank(&format!("{} {}", e.question, ctx.text), 5)
    });
    let pcas = oracle(&|e| pcas_oracle(e, &scorer, 0.6, 5).docs);
    for (method, want) in [
        (Method::B1, b1),
        (Method::B2, b2),
        (Method::B3, b3),
        (Method::Pcas, pcas),
    ] {
        let got = library(MethodConfig::for_method(method));
        ensure(got == want, || {
            format!("{method}: library {got:?} vs oracle {want:?}")
        })?;
    }
    ensure(b1.0 < 1.0, || format!("B1 R@1 = {}", b1.0))?;
    ensure(pcas.0 == 1.0, || format!("PCAS R@1 = {}", pcas.0))?;
    ensure(b2.1 > b3.1, || format!("MAP@5 B2 {} <= B3 {}", b2.1, b3.1))?;
    Ok(format!(
        "B1 R@1 {:.4} < 1; PCAS(0.6,5) R@1 {:.1}; MAP@5 B2 {:.4} > B3 {:.4}",
        b1.0, pcas.0, b2.1, b3.1
    ))
}

// 6 --------------------------------------------------------------------------

fn sources(texts: &[String]) -> Vec<Example> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Example {
            example_id: format!("s{i:03}"),
            question: format!("question {i}"),
            contexts: vec![ContextItem::new("g", t.clone())],
            gold_doc_id: "d0".into(),
            gold_ctx_id: Some("g".into()),
        })
        .collect()
}

fn dataset_builder() -> Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let plain: Vec<String> = (0..30)
        .map(|i| format!("I hold permit number {i}"))
        .collect();
    let plain_path = tmp.path().join("plain.jsonl");
    write_examples(&sources(&plain), &plain_path).unwrap();
    let out = cmd_build_dataset(
        &plain_path,
        "permissive",
        &BuildConfig::default(),
        &tmp.path().join("p"),
    )
    .map_err(|e| e.to_string())?;
    let built = load_examples(&out.examples).unwrap();
    for (src, ex) in plain.iter().zip(&built) {
        ensure(ex.contexts.len() == 10, || {
            format!("{} has {} contexts", ex.example_id, ex.contexts.len())
        })?;
        ensure(ex.gold_context().map(|c| &c.text) == Some(src), || {
            format!("{} lost its gold context", ex.example_id)
        })?;
    }

    let negated: Vec<String> = [
        ("I am a veteran", "I am not a veteran"),
        ("I'm abroad", "I'm not abroad"),
        ("I own boats", "I own no boats"),
        ("I receive a pension", "I never receive a pension"),
        ("I can work full time", "I can't work full time"),
        ("I drive to work", "I never drive to work"),
        ("I was born in Wales", "I wasn't born in Wales"),
    ]
    .iter()
    .flat_map(|(a, b)| [a.to_string(), b.to_string()])
    .collect();
    let neg_path = tmp.path().join("negated.jsonl");
    write_examples(&sources(&negated), &neg_path).unwrap();
    let cfg = BuildConfig {
        seed: 11,
        ..BuildConfig::default()
    };
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|d| cmd_build_dataset(&neg_path, "heuristic", &cfg, &tmp.path().join(d)).unwrap())
        .collect();
    let report = &runs[0].build_report;
    let short: Vec<_> = report
        .undersized
        .iter()
        .filter(|d| (1..=9).contains(&d.size))
        .collect();
    ensure(!short.is_empty(), || "no short set produced".into())?;
    ensure(
        report.undersized.iter().all(|d| d.size < cfg.target_size),
        || "bad diagnostic".into(),
    )?;
    for pair in [
        (&runs[0].examples, &runs[1].examples),
        (&runs[0].report, &runs[1].report),
    ] {
        ensure(
            fs::read(pair.0).unwrap() == fs::read(pair.1).unwrap(),
            || format!("{} differs between runs", pair.0.display()),
        )?;
    }
    Ok(format!(
        "permissive: {}/{} sets of size 10 with gold; heuristic: {} short sets flagged (sizes {:?}); outputs byte-identical",
        built.len(),
        built.len(),
        short.len(),
        short.iter().map(|d| d.size).collect::<BTreeSet<_>>()
    ))
}

// 7 --------------------------------------------------------------------------

fn random_run(r: &mut ChaCha8Rng) -> Run {
    let mut run = Run::default();
    for q in 0..r.random_range(1..=12) {
        let n = r.random_range(1..=15);
        let items = (0..n).map(|i| {
            // six-decimal scores, with frequent ties
            Scored::new(
                format!("doc-{i}"),
                f64::from(r.random_range(-3000..3000i32) / 7 * 7) / 1000.0,
            )
        });
        run.insert(format!("q{q}"), select_top_k(items, n).unwrap());
    }
    run
}

fn format_round_trips() -> Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let mut r = rng(707);
    for i in 0..100 {
        let run = random_run(&mut r);
        let path = tmp.path().join(format!("run{i}.trec"));
        write_trec_run(&run, "tag", &path).unwrap();
        let back = parse_trec_run(&path).map_err(|e| e.to_string())?;
        ensure(back == run, || format!("run {i} changed in round trip"))?;
    }
    let mut tables = 0;
    for dim in 3..=64 {
        let mut table = EmbeddingTable::new(dim, Similarity::Cosine).unwrap();
        for j in 0..r.random_range(1..20) {
            let v: Vec<f64> = (0..dim)
                .map(|_| {
                    f64::from(
                        r.random_range(-1.0e3f32..1.0e3)
                            * if r.random_range(0..5) == 0 {
                                1e-40
                            } else {
                                1.0
                            },
                    )
                })
                .collect();
            table.insert(format!("c:e{j}:c{dim:02}"), &v).unwrap();
        }
        let path = tmp.path().join(format!("emb{dim}.bin"));
        write_embeddings_binary(&table, &path).unwrap();
        let back = read_embeddings_binary(&path, Similarity::Cosine).map_err(|e| e.to_string())?;
        ensure(back.ids() == table.ids(), || {
            format!("dim {dim}: ids differ")
        })?;
        for id in table.ids() {
            let bits = |t: &EmbeddingTable| {
                t.get(id)
                    .unwrap()
                    .iter()
                    .map(|x| x.to_bits())
                    .collect::<Vec<_>>()
            };
            ensure(bits(&back) == bits(&table), || {
                format!("dim {dim}: {id} not bitwise equal")
            })?;
        }
        tables += 1;
    }
    Ok(format!(
        "100 TREC runs identical; {tables} embedding tables (dims 3-64) bitwise-exact"
    ))
}

// 8 --------------------------------------------------------------------------

fn scale_smoke() -> Result<String, String> {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let synthetic = generate(&SyntheticSpec::default());
    let mean_len =
        synthetic.doc_lengths.iter().sum::<usize>() as f64 / synthetic.doc_lengths.len() as f64;
    ensure((mean_len - 38.5).abs() < 1.5, || {
        format!("mean doc length {mean_len}")
    })?;
    let corpus_path = tmp.path().join("corpus.jsonl");
    let examples_path = tmp.path().join("examples.jsonl");
    write_corpus(&synthetic.corpus, &corpus_path).unwrap();
    write_examples(&synthetic.examples, &examples_path).unwrap();
    let out = tmp.path().join("out");

    let index = cmd_index(&corpus_path, 1.2, 0.75, &out).map_err(|e| format!("{e:#}"))?;
    let mut summary = Vec::new();
    for (scorer, index) in [(ScorerKind::Lexical, Some(index)), (ScorerKind::Hash, None)] {
        let mut plan = RunPlan::new(&corpus_path, &examples_path, &out);
        plan.scorer = scorer;
        plan.index = index;
        plan.check = true;
        let runs = cmd_run(&plan).map_err(|e| format!("{e:#}"))?;
        ensure(runs.doc_runs.len() == 5 && runs.ctx_runs.len() == 3, || {
            "missing run files".into()
        })?;
        let report = cmd_eval(&EvalPlan {
            runs: runs.doc_runs.clone(),
            ctx_runs: runs.ctx_runs.clone(),
            qrels: runs.doc_qrels.clone(),
            ctx_qrels: Some(runs.ctx_qrels.clone()),
            doc_metrics: pcas_cli::default_doc_metrics(),
            ctx_metrics: pcas_cli::default_ctx_metrics(),
            out_dir: out.clone(),
            name: format!("report_{}", plan.scorer_label()),
        })
        .map_err(|e| format!("{e:#}"))?;
        ensure(report.rows.len() == 5, || "report rows".into())?;
        let pcas = report
            .rows
            .iter()
            .find(|r| r.method.starts_with("PCAS"))
            .unwrap();
        let r1 = pcas
            .documents
            .as_ref()
            .unwrap()
            .get(&MetricSpec::recall(1))
            .unwrap();
        summary.push(format!(
            "{} PCAS R@1 {:.2}",
            plan.scorer_label(),
            r1 * 100.0
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "651 docs (mean {mean_len:.1} tokens), 1105 examples x 10 contexts, 5 methods x 2 scorers, checks on: {}; {secs:.1}s",
        summary.join(", ")
    ))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("metric oracle equivalence", metric_oracle),
        ("ranking oracle equivalence", ranking_oracle),
        ("PCAS degeneracies", pcas_degeneracies),
        ("PCAS brute-force equivalence", pcas_brute_force),
        ("separability fixture", separability),
        ("dataset builder", dataset_builder),
        ("format round trips", format_round_trips),
        ("scale smoke test", scale_smoke),
    ];
    // keep panic messages out of the summary lines
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
