use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BaselineError, SparseVector};

/// Distances at or below this count as an exact match.
const EXACT_MATCH: f64 = 1e-12;

/// Distance-weighted k-nearest-neighbour command ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    vectors: Vec<SparseVector>,
    labels: Vec<String>,
    /// Every training label, most frequent first (ties lexicographic).
    prior_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    /// Vote weight `1 / distance`; `None` for an exact match.
    pub fn weight(&self) -> Option<f64> {
        (self.distance > EXACT_MATCH).then(|| 1.0 / self.distance)
    }
}

pub fn knn_train(vectors: Vec<SparseVector>, labels: Vec<String>) -> Result<KnnModel, BaselineError> {
    if vectors.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if vectors.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    Ok(KnnModel {
        prior_order: frequency_order(&labels),
        vectors,
        labels,
    })
}

pub(crate) fn frequency_order(labels: &[String]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order.into_iter().map(|(l, _)| l.to_owned()).collect()
}

impl KnnModel {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The `k` closest training vectors, nearest first (ties by index).
    pub fn neighbors(&self, query: &SparseVector, k: usize) -> Result<Vec<Neighbor>, BaselineError> {
        if k == 0 || k > self.len() {
            return Err(BaselineError::BadK { k, train: self.len() });
        }
        let mut all: Vec<Neighbor> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(index, v)| Neighbor {
                index,
                distance: query.distance(v),
            })
            .collect();
        all.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap_or(Ordering::Equal)
                .then(a.index.cmp(&b.index))
        });
        all.truncate(k);
        Ok(all)
    }

    /// Full command ranking: labels of exact-match neighbours first, then
    /// the other neighbour labels by summed `1/distance` vote, then every
    /// remaining training label by training frequency.
    pub fn predict(&self, query: &SparseVector, k: usize) -> Result<Vec<String>, BaselineError> {
        let neighbors = self.neighbors(query, k)?;
        let mut exact: HashMap<&str, usize> = HashMap::new();
        let mut votes: HashMap<&str, f64> = HashMap::new();
        for n in &neighbors {
            let label = self.labels[n.index].as_str();
            match n.weight() {
                None => *exact.entry(label).or_default() += 1,
                Some(w) => *votes.entry(label).or_default() += w,
            }
        }
        let mut exact: Vec<(&str, usize)> = exact.into_iter().collect();
        exact.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut voted: Vec<(&str, f64)> = votes
            .into_iter()
            .filter(|(l, _)| !exact.iter().any(|(e, _)| e == l))
            .collect();
        voted.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(b.0))
        });

        let mut ranking: Vec<String> = exact
            .iter()
            .map(|(l, _)| l.to_string())
            .chain(voted.iter().map(|(l, _)| l.to_string()))
            .collect();
        for label in &self.prior_order {
            if !ranking.contains(label) {
                ranking.push(label.clone());
            }
        }
        Ok(ranking)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied()).normalized()
    }

    fn model() -> KnnModel {
        knn_train(
            vec![
                v(&[(0, 1.0)]),
                v(&[(0, 1.0), (1, 0.2)]),
                v(&[(1, 1.0)]),
                v(&[(2, 1.0)]),
                v(&[(2, 1.0), (3, 0.1)]),
            ],
            ["a", "a", "b", "c", "c"].map(String::from).to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn exact_match_wins_outright() {
        let m = model();
        // Query equals the lone "b" vector but sits near two "a" vectors too.
        let ranking = m.predict(&v(&[(1, 1.0)]), 5).unwrap();
        assert_eq!(ranking[0], "b");
        assert_eq!(ranking.len(), 3);
    }

    #[test]
    fn k_one_is_nearest_label() {
        let m = model();
        assert_eq!(m.predict(&v(&[(2, 1.0), (3, 0.3)]), 1).unwrap()[0], "c");
        assert_eq!(m.predict(&v(&[(0, 1.0), (1, 0.9)]), 1).unwrap()[0], "a");
    }

    #[test]
    fn ranking_covers_all_labels() {
        let m = model();
        let mut r = m.predict(&v(&[(0, 1.0)]), 1).unwrap();
        r.sort();
        assert_eq!(r, ["a", "b", "c"]);
    }

    #[test]
    fn weights_are_positive_and_finite() {
        let m = model();
        for n in m.neighbors(&v(&[(0, 0.5), (2, 1.0)]), 5).unwrap() {
            let w = n.weight().unwrap();
            assert!(w > 0.0 && w.is_finite());
        }
    }

    #[test]
    fn exact_match_survives_larger_k() {
        let m = model();
        for k in 1..=5 {
            assert_eq!(m.predict(&v(&[(2, 1.0)]), k).unwrap()[0], "c");
        }
    }

    #[test]
    fn bad_k_is_rejected() {
        let m = model();
        assert!(m.predict(&v(&[(0, 1.0)]), 0).is_err());
        assert!(m.predict(&v(&[(0, 1.0)]), 6).is_err());
        assert!(knn_train(vec![], vec![]).is_err());
    }
}
