//! TREC run (`qid Q0 item rank score tag`) and qrels (`qid 0 item grade`) files.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Qrels, Run};
use crate::error::{Error, Result};
use crate::scoring::{RankedList, Scored};

fn check_token(kind: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.contains(char::is_whitespace) {
        return Err(Error::InvalidParameter(format!(
            "{kind} {value:?} must be non-empty and free of whitespace"
        )));
    }
    Ok(())
}

/// Writes queries in ascending id order, items in rank order, scores with
/// six decimals.
pub fn write_trec_run(run: &Run, tag: &str, path: impl AsRef<Path>) -> Result<()> {
    check_token("run tag", tag)?;
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (qid, list) in &run.0 {
        check_token("query id", qid)?;
        for (i, item) in list.items().iter().enumerate() {
            check_token("item id", &item.id)?;
            writeln!(w, "{qid} Q0 {} {} {:.6} {tag}", item.id, i + 1, item.score).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedRun {
    pub run: Run,
    /// Tag of the first line; `None` for an empty file.
    pub tag: Option<String>,
}

pub fn parse_trec_run(path: impl AsRef<Path>) -> Result<Run> {
    parse_trec_run_tagged(path).map(|t| t.run)
}

/// Parses a run file. Ranks must start at 1 and increase by one per line
/// within each query; the rank column, not the score, fixes the order.
pub fn parse_trec_run_tagged(path: impl AsRef<Path>) -> Result<TaggedRun> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lists: BTreeMap<String, Vec<Scored>> = BTreeMap::new();
    let mut tag = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _q0, item, rank, score, line_tag] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid score {score:?}")))?;
        if !score.is_finite() {
            return Err(Error::parse(path, lineno, "non-finite score"));
        }
        let list = lists.entry(qid.to_string()).or_default();
        if rank != list.len() + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "non-contiguous rank {rank} for query {qid:?}, expected {}",
                    list.len() + 1
                ),
            ));
        }
        list.push(Scored::new(item, score));
        tag.get_or_insert_with(|| line_tag.to_string());
    }
    let mut run = Run::default();
    for (qid, items) in lists {
        let list = RankedList::from_ranked(items)
            .map_err(|e| Error::parse(path, 0, format!("query {qid:?}: {e}")))?;
        run.insert(qid, list);
    }
    Ok(TaggedRun { run, tag })
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (qid, rel) in qrels.queries() {
        check_token("query id", qid)?;
        for (item, grade) in rel {
            check_token("item id", item)?;
            writeln!(w, "{qid} 0 {item} {grade}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Parses `qid 0 item grade` lines. Grade-0 judgments are dropped, and so
/// are queries left without any relevant item.
pub fn parse_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = Qrels::default();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iter, item, grade] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid grade {grade:?}")))?;
        if let Some(first) = seen.insert((qid.to_string(), item.to_string()), lineno) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate judgment for ({qid}, {item}), first on line {first}"),
            ));
        }
        if grade >= 1 {
            qrels.insert(qid, item, u32::try_from(grade).unwrap_or(u32::MAX));
        }
    }
    Ok(qrels)
}
