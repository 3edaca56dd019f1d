use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{BaselineError, SparseVector};
use crate::featurizer::TokenStream;

/// Joins the tokens of an n-gram into one feature key.
const NGRAM_JOIN: char = '\u{1f}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramConfig {
    /// Largest n-gram order; every order `1..=max_n` is extracted.
    pub max_n: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { max_n: 1 }
    }
}

/// All contiguous n-grams of orders `1..=max_n`, one entry per position.
pub fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for window in tokens.windows(n) {
            let mut key = String::new();
            for (i, tok) in window.iter().enumerate() {
                if i > 0 {
                    key.push(NGRAM_JOIN);
                }
                key.push_str(tok);
            }
            out.push(key);
        }
    }
    out
}

/// Splits a feature key back into its tokens.
pub fn ngram_tokens(key: &str) -> Vec<&str> {
    key.split(NGRAM_JOIN).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub config: NgramConfig,
    /// Feature keys in id order (sorted).
    features: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    idf: Vec<f64>,
    doc_count: usize,
}

/// Learns the n-gram feature index and smoothed inverse document
/// frequencies `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn fit_tfidf(corpus: &[TokenStream], config: NgramConfig) -> Result<TfidfModel, BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    if config.max_n == 0 {
        return Err(BaselineError::BadNgramOrder(config.max_n));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<String> = ngrams(doc.tokens(), config.max_n).into_iter().collect();
        for key in distinct {
            *df.entry(key).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let idf = df
        .values()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let features: Vec<String> = df.into_keys().collect();
    Ok(TfidfModel::from_parts(config, features, idf, corpus.len()))
}

impl TfidfModel {
    fn from_parts(config: NgramConfig, features: Vec<String>, idf: Vec<f64>, doc_count: usize) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        Self {
            config,
            features,
            index,
            idf,
            doc_count,
        }
    }

    /// Restores the lookup index after deserialization.
    pub(crate) fn reindex(self) -> Self {
        Self::from_parts(self.config, self.features, self.idf, self.doc_count)
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn feature_id(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn feature_key(&self, id: u32) -> Option<&str> {
        self.features.get(id as usize).map(String::as_str)
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Raw counts of known n-grams; unseen n-grams are ignored.
    pub fn count_vector(&self, stream: &TokenStream) -> SparseVector {
        SparseVector::from_pairs(
            ngrams(stream.tokens(), self.config.max_n)
                .iter()
                .filter_map(|k| self.feature_id(k))
                .map(|id| (id, 1.0)),
        )
    }

    /// Counts weighted by idf, then scaled to unit length.
    pub fn transform(&self, stream: &TokenStream) -> SparseVector {
        let counts = self.count_vector(stream);
        SparseVector::from_pairs(
            counts
                .entries()
                .iter()
                .map(|&(id, c)| (id, c * self.idf[id as usize])),
        )
        .normalized()
    }
}

/// Overlap of raw n-gram counts.
pub fn count_score(sequent_counts: &SparseVector, lemma_counts: &SparseVector) -> f64 {
    sequent_counts.dot(lemma_counts)
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn tfidf_score(sequent: &SparseVector, lemma: &SparseVector) -> f64 {
    let denom = sequent.norm() * lemma.norm();
    if denom == 0.0 {
        0.0
    } else {
        sequent.dot(lemma) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(tokens: &[&str]) -> TokenStream {
        tokens.iter().copied().collect()
    }

    fn worksheet() -> Vec<TokenStream> {
        vec![
            stream(&["a", "b", "a"]),
            stream(&["b", "c"]),
            stream(&["a", "c", "c", "d"]),
        ]
    }

    #[test]
    fn idf_floor_for_ubiquitous_term() {
        let m = fit_tfidf(&[stream(&["x", "y"]), stream(&["x"])], NgramConfig::default()).unwrap();
        assert_eq!(m.idf()[m.feature_id("x").unwrap() as usize], 1.0);
    }

    #[test]
    fn idf_of_term_in_one_of_two_docs() {
        let m = fit_tfidf(&[stream(&["x", "y"]), stream(&["x"])], NgramConfig::default()).unwrap();
        let idf = m.idf()[m.feature_id("y").unwrap() as usize];
        assert!((idf - 1.405_465_108_108_164_4).abs() < 1e-12);
    }

    #[test]
    fn trigram_positions_on_length_five() {
        let toks: Vec<String> = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        assert_eq!(ngrams(&toks, 3).len(), 12);
        assert_eq!(ngram_tokens(&ngrams(&toks, 3)[5]), ["a", "b"]);
    }

    #[test]
    fn worksheet_weights() {
        let m = fit_tfidf(&worksheet(), NgramConfig::default()).unwrap();
        assert_eq!(m.doc_count(), 3);
        let v = m.transform(&worksheet()[2]);
        let id = |k: &str| m.feature_id(k).unwrap();
        // idf(a)=idf(c)=ln(4/3)+1, idf(d)=ln(2)+1; counts a1 c2 d1; unit norm.
        assert!((v.get(id("a")) - 0.385_502_921_610_100_63).abs() < 1e-9);
        assert!((v.get(id("c")) - 0.771_005_843_220_201_27).abs() < 1e-9);
        assert!((v.get(id("d")) - 0.506_890_014_845_807_58).abs() < 1e-9);
        assert_eq!(v.get(id("b")), 0.0);

        let v1 = m.transform(&worksheet()[0]);
        assert!((v1.get(id("a")) - 0.894_427_190_999_915_9).abs() < 1e-9);
        assert!((v1.get(id("b")) - 0.447_213_595_499_957_9).abs() < 1e-9);
        assert!((tfidf_score(&v1, &v) - 0.344_804_295_297_983_08).abs() < 1e-9);
    }

    #[test]
    fn unknown_features_give_zero_vector() {
        let m = fit_tfidf(&worksheet(), NgramConfig::default()).unwrap();
        assert!(m.transform(&stream(&["q", "r"])).is_empty());
        let s = stream(&["a", "d", "q"]);
        assert_eq!(m.transform(&s), m.transform(&s));
    }

    #[test]
    fn count_scores() {
        let m = fit_tfidf(&[stream(&["p", "q", "r", "s"])], NgramConfig::default()).unwrap();
        let seq = m.count_vector(&stream(&["p", "q", "q"]));
        let lem = m.count_vector(&stream(&["p", "p", "p", "q"]));
        assert_eq!(count_score(&seq, &lem), 5.0);
        assert_eq!(count_score(&lem, &seq), 5.0);
        let disjoint = m.count_vector(&stream(&["r", "s"]));
        assert_eq!(count_score(&seq, &disjoint), 0.0);
        assert_eq!(count_score(&seq, &seq), 1.0 + 4.0);
    }

    #[test]
    fn cosine_identity_and_orthogonality() {
        let m = fit_tfidf(&worksheet(), NgramConfig::default()).unwrap();
        let a = m.transform(&stream(&["a", "b"]));
        let d = m.transform(&stream(&["d"]));
        assert!((tfidf_score(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(tfidf_score(&a, &d), 0.0);
        assert_eq!(tfidf_score(&a, &SparseVector::default()), 0.0);
    }

    #[test]
    fn higher_orders_contain_lower_order_features() {
        let corpus = worksheet();
        let models: Vec<TfidfModel> = (1..=3)
            .map(|n| fit_tfidf(&corpus, NgramConfig { max_n: n }).unwrap())
            .collect();
        for pair in models.windows(2) {
            let bigger: BTreeSet<&String> = pair[1].features().iter().collect();
            assert!(pair[0].features().iter().all(|f| bigger.contains(f)));
            assert!(pair[1].n_features() > pair[0].n_features());
        }
    }

    #[test]
    fn rejects_empty_corpus() {
        assert!(fit_tfidf(&[], NgramConfig::default()).is_err());
    }
}
