use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

impl Scored {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        Scored {
            id: id.into(),
            score,
        }
    }
}

/// Descending score, then ascending id.
pub fn ranking_order(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Items ordered by non-increasing score with ties broken by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    items: Vec<Scored>,
}

impl RankedList {
    /// Wraps entries that are already in rank order. Rejects duplicate ids,
    /// non-finite scores and increasing scores; the order of equal-score
    /// entries is kept as given.
    pub fn from_ranked(items: Vec<Scored>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if !item.score.is_finite() {
                return Err(Error::InvalidRanking(format!(
                    "non-finite score for {:?}",
                    item.id
                )));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(Error::InvalidRanking(format!("duplicate id {:?}", item.id)));
            }
            if i > 0 && items[i - 1].score < item.score {
                return Err(Error::InvalidRanking(format!(
                    "score increases at position {} ({:?})",
                    i + 1,
                    item.id
                )));
            }
        }
        Ok(RankedList { items })
    }

    pub fn empty() -> Self {
        RankedList::default()
    }

    /// Full invariant check, including ascending ids within equal scores.
    pub fn validate(&self) -> Result<()> {
        RankedList::from_ranked(self.items.clone())?;
        for pair in self.items.windows(2) {
            if pair[0].score == pair[1].score && pair[0].id >= pair[1].id {
                return Err(Error::InvalidRanking(format!(
                    "tied ids out of order: {:?} before {:?}",
                    pair[0].id, pair[1].id
                )));
            }
        }
        Ok(())
    }

    pub fn items(&self) -> &[Scored] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn first(&self) -> Option<&Scored> {
        self.items.first()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.id.as_str())
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|s| s.id == id).map(|p| p + 1)
    }

    pub fn truncated(&self, k: usize) -> RankedList {
        RankedList {
            items: self.items.iter().take(k).cloned().collect(),
        }
    }

    pub fn into_items(self) -> Vec<Scored> {
        self.items
    }
}

/// Selects the `k` best entries under [`ranking_order`].
pub fn select_top_k(scored: impl IntoIterator<Item = Scored>, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let mut items: Vec<Scored> = scored
        .into_iter()
        .map(|mut s| {
            // fold -0.0 into 0.0 so equal scores compare equal under total_cmp
            s.score += 0.0;
            s
        })
        .collect();
    if items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(bad) = items.iter().find(|s| s.score.is_nan()) {
        return Err(Error::InvalidRanking(format!("NaN score for {:?}", bad.id)));
    }
    {
        let mut seen = HashSet::with_capacity(items.len());
        if let Some(dup) = items.iter().find(|s| !seen.insert(s.id.as_str())) {
            return Err(Error::InvalidRanking(format!("duplicate id {:?}", dup.id)));
        }
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, ranking_order);
        items.truncate(k);
    }
    items.sort_unstable_by(ranking_order);
    Ok(RankedList { items })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, score: f64) -> Scored {
        Scored::new(id, score)
    }

    #[test]
    fn k_larger_than_candidates_returns_all_sorted() {
        let list = select_top_k(vec![s("b", 1.0), s("a", 3.0), s("c", 2.0)], 10).unwrap();
        assert_eq!(list.ids().collect::<Vec<_>>(), ["a", "c", "b"]);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let list = select_top_k(vec![s("d2", 0.5), s("d10", 0.5), s("d1", 0.5)], 2).unwrap();
        assert_eq!(list.ids().collect::<Vec<_>>(), ["d1", "d10"]);
        list.validate().unwrap();
    }

    #[test]
    fn negative_zero_ties_with_zero() {
        let list = select_top_k(vec![s("b", 0.0), s("a", -0.0)], 2).unwrap();
        assert_eq!(list.ids().collect::<Vec<_>>(), ["a", "b"]);
        list.validate().unwrap();
    }

    #[test]
    fn zero_k_and_empty_candidates_are_errors() {
        assert!(matches!(
            select_top_k(vec![s("a", 1.0)], 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            select_top_k(Vec::new(), 3),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn nan_and_duplicates_are_rejected() {
        assert!(select_top_k(vec![s("a", f64::NAN)], 1).is_err());
        assert!(select_top_k(vec![s("a", 1.0), s("a", 2.0)], 1).is_err());
    }

    #[test]
    fn from_ranked_checks_order() {
        assert!(RankedList::from_ranked(vec![s("a", 1.0), s("b", 2.0)]).is_err());
        let tied = RankedList::from_ranked(vec![s("b", 1.0), s("a", 1.0)]).unwrap();
        assert!(tied.validate().is_err());
        assert_eq!(tied.rank_of("a"), Some(2));
    }
}
