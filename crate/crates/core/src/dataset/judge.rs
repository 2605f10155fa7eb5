use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Compatible,
    Contradicts,
}

/// Decides whether a candidate context can join an accepted set.
/// Implementations must be deterministic, and a candidate is always
/// compatible with an empty set.
pub trait ContradictionJudge: Send + Sync {
    fn name(&self) -> &str;

    fn judge(&self, candidate: &str, accepted: &[&str]) -> Verdict;
}

/// Accepts everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct PermissiveJudge;

impl ContradictionJudge for PermissiveJudge {
    fn name(&self) -> &str {
        "permissive"
    }

    fn judge(&self, _candidate: &str, _accepted: &[&str]) -> Verdict {
        Verdict::Compatible
    }
}

/// Rejects any candidate once something has been accepted.
#[derive(Debug, Clone, Copy, Default)]
pub struct StrictJudge;

impl ContradictionJudge for StrictJudge {
    fn name(&self) -> &str {
        "strict"
    }

    fn judge(&self, _candidate: &str, accepted: &[&str]) -> Verdict {
        if accepted.is_empty() {
            Verdict::Compatible
        } else {
            Verdict::Contradicts
        }
    }
}

const NEGATIONS: [&str; 4] = ["not", "n't", "no", "never"];

/// Normalized words with "n't" split off its stem and edge punctuation
/// stripped, so "isn't" becomes ["is", "n't"].
fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in normalize(text).split(' ') {
        let w = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'');
        let w = w.trim_matches('\'');
        if w.is_empty() {
            continue;
        }
        match w.strip_suffix("n't") {
            Some(stem) => {
                let stem = match stem {
                    "ca" => "can",
                    "wo" => "will",
                    "sha" => "shall",
                    s => s,
                };
                if !stem.is_empty() {
                    out.push(stem.to_string());
                }
                out.push("n't".to_string());
            }
            None => out.push(w.to_string()),
        }
    }
    out
}

fn without_negations(text: &str) -> Vec<String> {
    words(text)
        .into_iter()
        .filter(|w| !NEGATIONS.contains(&w.as_str()))
        .collect()
}

/// Flags duplicates and statement pairs that differ only by negation words
/// ("not", "n't", "no", "never").
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicJudge;

impl ContradictionJudge for HeuristicJudge {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn judge(&self, candidate: &str, accepted: &[&str]) -> Verdict {
        let stripped = without_negations(candidate);
        for other in accepted {
            if without_negations(other) == stripped {
                return Verdict::Contradicts;
            }
        }
        Verdict::Compatible
    }
}

pub fn judge_by_name(name: &str) -> Result<Box<dyn ContradictionJudge>> {
    match name {
        "permissive" => Ok(Box::new(PermissiveJudge)),
        "heuristic" => Ok(Box::new(HeuristicJudge)),
        "strict" => Ok(Box::new(StrictJudge)),
        other => Err(Error::UnknownJudge(other.to_string())),
    }
}
