//! Classical comparison systems: TF-IDF n-gram features, kNN and linear
//! command rankers, and sparse lemma scorers.

mod knn;
mod linear;
mod sparse;
mod tfidf;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use knn::{knn_train, KnnModel, Neighbor};
pub use linear::{linear_train, LinearConfig, LinearGradient, LinearModel};
pub use sparse::SparseVector;
pub use tfidf::{count_score, fit_tfidf, ngram_tokens, ngrams, tfidf_score, NgramConfig, TfidfModel};

pub(crate) use knn::frequency_order;

/// Version written into every persisted baseline model.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1, got {0}")]
    BadNgramOrder(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("k must be in 1..={train}, got {k}")]
    BadK { k: usize, train: usize },
    #[error("need at least two classes, got {0}")]
    SingleClass(usize),
    #[error("invalid training setting: {0}")]
    BadConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

/// A model that can be written to and read from a versioned JSON file.
pub trait Persist: Serialize + DeserializeOwned + Sized {
    const FORMAT: &'static str;

    fn restore(self) -> Self {
        self
    }

    fn save(&self, path: &Path) -> Result<(), BaselineError> {
        let env = Envelope {
            format: Self::FORMAT.to_owned(),
            version: MODEL_FORMAT_VERSION,
            model: self,
        };
        let text = serde_json::to_string(&env).map_err(|e| BaselineError::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        fs::write(path, text).map_err(|source| BaselineError::Io {
            path: path.to_owned(),
            source,
        })
    }

    fn load(path: &Path) -> Result<Self, BaselineError> {
        let text = fs::read_to_string(path).map_err(|source| BaselineError::Io {
            path: path.to_owned(),
            source,
        })?;
        let bad = |message: String| BaselineError::Format {
            path: path.to_owned(),
            message,
        };
        let env: Envelope<Self> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if env.format != Self::FORMAT {
            return Err(bad(format!("expected format {}, found {}", Self::FORMAT, env.format)));
        }
        if env.version != MODEL_FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", env.version)));
        }
        Ok(env.model.restore())
    }
}

impl Persist for TfidfModel {
    const FORMAT: &'static str = "tfidf";

    fn restore(self) -> Self {
        self.reindex()
    }
}

impl Persist for KnnModel {
    const FORMAT: &'static str = "knn";
}

impl Persist for LinearModel {
    const FORMAT: &'static str = "linear";
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurizer::TokenStream;

    #[test]
    fn tfidf_round_trip_restores_lookup() {
        let corpus: Vec<TokenStream> = vec![["a", "b"].into_iter().collect(), ["b", "c"].into_iter().collect()];
        let m = fit_tfidf(&corpus, NgramConfig { max_n: 2 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tfidf.json");
        m.save(&path).unwrap();
        let back = TfidfModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.transform(&corpus[0]), m.transform(&corpus[0]));
    }

    #[test]
    fn wrong_format_is_rejected() {
        let corpus: Vec<TokenStream> = vec![["a"].into_iter().collect()];
        let m = fit_tfidf(&corpus, NgramConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert!(matches!(KnnModel::load(&path), Err(BaselineError::Format { .. })));
    }
}
