use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Feature-id → weight map stored as entries sorted by id. Zero weights are
/// never stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_map(map: BTreeMap<u32, f64>) -> Self {
        Self {
            entries: map.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    /// Builds from unsorted pairs, summing duplicates.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (i, w) in pairs {
            *map.entry(i).or_insert(0.0) += w;
        }
        Self::from_map(map)
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> SparseVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        SparseVector {
            entries: self.entries.iter().map(|&(i, w)| (i, w / n)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(i, w)| (i, w * factor)))
    }

    /// Euclidean distance, accumulated coordinate-wise so identical vectors
    /// are at distance exactly zero.
    pub fn distance(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => match i.cmp(&j) {
                    std::cmp::Ordering::Less => {
                        sum += x * x;
                        a.next();
                    }
                    std::cmp::Ordering::Greater => {
                        sum += y * y;
                        b.next();
                    }
                    std::cmp::Ordering::Equal => {
                        sum += (x - y) * (x - y);
                        a.next();
                        b.next();
                    }
                },
                (Some(&&(_, x)), None) => {
                    sum += x * x;
                    a.next();
                }
                (None, Some(&&(_, y))) => {
                    sum += y * y;
                    b.next();
                }
                (None, None) => break,
            }
        }
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_are_dropped_and_duplicates_summed() {
        let v = SparseVector::from_pairs([(3, 1.0), (1, 0.0), (3, 2.0), (0, -1.0)]);
        assert_eq!(v.entries(), &[(0, -1.0), (3, 3.0)]);
        assert_eq!(v.get(3), 3.0);
        assert_eq!(v.get(1), 0.0);
    }

    #[test]
    fn dot_and_distance() {
        let a = SparseVector::from_pairs([(0, 1.0), (2, 2.0)]);
        let b = SparseVector::from_pairs([(2, 3.0), (5, 4.0)]);
        assert_eq!(a.dot(&b), 6.0);
        assert_eq!(a.dot(&b), b.dot(&a));
        assert!((a.distance(&b) - (1.0f64 + 1.0 + 16.0).sqrt()).abs() < 1e-12);
        assert_eq!(a.distance(&a), 0.0);
        assert!((a.normalized().norm() - 1.0).abs() < 1e-12);
        assert!(SparseVector::default().normalized().is_empty());
    }
}
