//! Lemma library indexing and ranking under dense, sparse and random scorers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{count_score, tfidf_score, SparseVector, TfidfModel};
use crate::corpus::{theory_index, LemmaRecord, SequentState};
use crate::encoder::{cosine, EncoderError, EncoderParameters};
use crate::featurizer::{Featurizer, FeaturizerConfig, TokenStream};
use crate::tokenizer::{TokenId, Tokenizer};

pub const INDEX_FORMAT: &str = "proofrec-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("lemma library is empty")]
    EmptyLibrary,
    #[error("duplicate lemma id {0}")]
    DuplicateLemma(String),
    #[error("unknown scorer {0:?}; expected one of siamese, tfidf, count, random")]
    UnknownScorer(String),
    #[error("scorer {0} is not registered in this index")]
    ScorerUnavailable(Scorer),
    #[error("{artifact} fingerprint mismatch: index expects {expected}, got {found}")]
    FingerprintMismatch {
        artifact: &'static str,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("bad index file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    Siamese,
    Tfidf,
    Count,
    Random,
}

impl Scorer {
    pub const ALL: [Scorer; 4] = [Scorer::Siamese, Scorer::Tfidf, Scorer::Count, Scorer::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Siamese => "siamese",
            Scorer::Tfidf => "tfidf",
            Scorer::Count => "count",
            Scorer::Random => "random",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scorer::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| RetrievalError::UnknownScorer(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaLibrary {
    lemmas: Vec<LemmaRecord>,
    /// Theory name → lemma ids in library order.
    theories: BTreeMap<String, Vec<String>>,
}

impl LemmaLibrary {
    pub fn new(lemmas: Vec<LemmaRecord>) -> Result<Self, RetrievalError> {
        let mut seen = HashSet::new();
        for l in &lemmas {
            if !seen.insert(l.lemma_id.as_str()) {
                return Err(RetrievalError::DuplicateLemma(l.lemma_id.clone()));
            }
        }
        let theories = theory_index(&lemmas);
        Ok(Self { lemmas, theories })
    }

    pub fn lemmas(&self) -> &[LemmaRecord] {
        &self.lemmas
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn theories(&self) -> &BTreeMap<String, Vec<String>> {
        &self.theories
    }

    pub fn position(&self, lemma_id: &str) -> Option<usize> {
        self.lemmas.iter().position(|l| l.lemma_id == lemma_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLemma {
    pub lemma_id: String,
    pub theory: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    /// Highest score first; equal scores in ascending lemma id order.
    pub entries: Vec<RankedLemma>,
    /// Positions in the full ranking whose score equals the one before.
    pub ties: usize,
}

impl RankedResult {
    /// 1-based rank of a lemma, if it is present.
    pub fn rank_of(&self, lemma_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.lemma_id == lemma_id).map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Orders `(lemma, score)` pairs and counts ties.
pub fn rank_scores(lemmas: &[LemmaRecord], scores: &[f64], top_k: Option<usize>) -> RankedResult {
    let mut order: Vec<usize> = (0..lemmas.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| lemmas[a].lemma_id.cmp(&lemmas[b].lemma_id))
    });
    let ties = order.windows(2).filter(|w| scores[w[0]] == scores[w[1]]).count();
    if let Some(k) = top_k {
        order.truncate(k);
    }
    RankedResult {
        entries: order
            .into_iter()
            .map(|i| RankedLemma {
                lemma_id: lemmas[i].lemma_id.clone(),
                theory: lemmas[i].theory.clone(),
                score: scores[i],
            })
            .collect(),
        ties,
    }
}

/// I.i.d. uniform scores in `[0, 1)` for every library entry, drawn from a
/// stream keyed by the seed and the query tokens.
pub fn random_scores(seed: u64, query: &TokenStream, n: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    for t in query.tokens() {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    let mut key = [0u8; 8];
    key.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(key));
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// The siamese encoder together with the tokenizer its ids come from.
#[derive(Debug, Clone)]
pub struct DenseEncoder {
    pub params: EncoderParameters,
    pub tokenizer: Tokenizer,
}

impl DenseEncoder {
    pub fn encode(&self, stream: &TokenStream) -> Vec<TokenId> {
        let mut ids = self.tokenizer.encode(stream);
        ids.truncate(self.params.config.max_len);
        ids
    }

    pub fn embed(&self, stream: &TokenStream) -> Result<Vec<f64>, EncoderError> {
        self.params.siamese_embed(&self.encode(stream))
    }
}

#[derive(Debug, Clone, Default)]
pub struct IndexArtifacts {
    pub dense: Option<DenseEncoder>,
    pub tfidf: Option<TfidfModel>,
    pub random_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFingerprints {
    pub library: String,
    pub tokenizer: Option<String>,
    pub encoder: Option<String>,
}

/// Precomputed lemma representations; immutable once built.
#[derive(Debug, Clone)]
pub struct LemmaIndex {
    library: LemmaLibrary,
    featurizer: Featurizer,
    dense: Option<DenseEncoder>,
    embeddings: Vec<Vec<f64>>,
    tfidf: Option<TfidfModel>,
    tfidf_vectors: Vec<SparseVector>,
    count_vectors: Vec<SparseVector>,
    random_seed: u64,
    fingerprints: IndexFingerprints,
}

fn library_fingerprint(library: &LemmaLibrary) -> String {
    let mut text = String::new();
    for l in library.lemmas() {
        text.push_str(&l.to_json().to_string());
        text.push('\n');
    }
    crate::fingerprint(text.as_bytes())
}

pub fn build_index(
    library: LemmaLibrary,
    featurizer: FeaturizerConfig,
    artifacts: IndexArtifacts,
) -> Result<LemmaIndex, RetrievalError> {
    if library.is_empty() {
        return Err(RetrievalError::EmptyLibrary);
    }
    let featurizer = Featurizer::new(featurizer).map_err(|e| RetrievalError::Format(e.to_string()))?;
    let streams: Vec<TokenStream> = library.lemmas().iter().map(|l| featurizer.featurize_lemma(l)).collect();
    let embeddings = match &artifacts.dense {
        Some(enc) => streams.iter().map(|s| enc.embed(s)).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let (tfidf_vectors, count_vectors) = match &artifacts.tfidf {
        Some(m) => (
            streams.iter().map(|s| m.transform(s)).collect(),
            streams.iter().map(|s| m.count_vector(s)).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let fingerprints = IndexFingerprints {
        library: library_fingerprint(&library),
        tokenizer: artifacts.dense.as_ref().map(|d| d.tokenizer.fingerprint()),
        encoder: artifacts.dense.as_ref().map(|d| d.params.fingerprint()),
    };
    Ok(LemmaIndex {
        library,
        featurizer,
        dense: artifacts.dense,
        embeddings,
        tfidf: artifacts.tfidf,
        tfidf_vectors,
        count_vectors,
        random_seed: artifacts.random_seed,
        fingerprints,
    })
}

impl LemmaIndex {
    pub fn library(&self) -> &LemmaLibrary {
        &self.library
    }

    pub fn len(&self) -> usize {
        self.library.len()
    }

    pub fn is_empty(&self) -> bool {
        self.library.is_empty()
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    pub fn fingerprints(&self) -> &IndexFingerprints {
        &self.fingerprints
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn scorers(&self) -> Vec<Scorer> {
        Scorer::ALL.into_iter().filter(|s| self.has_scorer(*s)).collect()
    }

    pub fn has_scorer(&self, scorer: Scorer) -> bool {
        match scorer {
            Scorer::Siamese => self.dense.is_some(),
            Scorer::Tfidf | Scorer::Count => self.tfidf.is_some(),
            Scorer::Random => true,
        }
    }

    /// Scores of every lemma for an already featurized query stream.
    pub fn score_stream(&self, query: &TokenStream, scorer: Scorer) -> Result<Vec<f64>, RetrievalError> {
        match scorer {
            Scorer::Siamese => {
                let enc = self.dense.as_ref().ok_or(RetrievalError::ScorerUnavailable(scorer))?;
                let q = enc.embed(query)?;
                Ok(self.embeddings.iter().map(|e| cosine(&q, e)).collect())
            }
            Scorer::Tfidf => {
                let m = self.tfidf.as_ref().ok_or(RetrievalError::ScorerUnavailable(scorer))?;
                let q = m.transform(query);
                Ok(self.tfidf_vectors.iter().map(|v| tfidf_score(&q, v)).collect())
            }
            Scorer::Count => {
                let m = self.tfidf.as_ref().ok_or(RetrievalError::ScorerUnavailable(scorer))?;
                let q = m.count_vector(query);
                Ok(self.count_vectors.iter().map(|v| count_score(&q, v)).collect())
            }
            Scorer::Random => Ok(random_scores(self.random_seed, query, self.len())),
        }
    }

    pub fn rank_stream(
        &self,
        query: &TokenStream,
        scorer: Scorer,
        top_k: Option<usize>,
    ) -> Result<RankedResult, RetrievalError> {
        let scores = self.score_stream(query, scorer)?;
        Ok(rank_scores(self.library.lemmas(), &scores, top_k))
    }

    /// Ranks the whole library for a sequent; `top_k` truncates after
    /// ranking.
    pub fn rank_lemmas(
        &self,
        sequent: &SequentState,
        scorer: Scorer,
        top_k: Option<usize>,
    ) -> Result<RankedResult, RetrievalError> {
        self.rank_stream(&self.featurizer.featurize_query(sequent), scorer, top_k)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            library: self.library.lemmas().iter().map(LemmaRecord::to_json).collect(),
            featurizer: self.featurizer.config().clone(),
            embeddings: self.embeddings.clone(),
            tfidf: self.tfidf.clone(),
            tfidf_vectors: self.tfidf_vectors.clone(),
            count_vectors: self.count_vectors.clone(),
            random_seed: self.random_seed,
            fingerprints: self.fingerprints.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| RetrievalError::Format(e.to_string()))?;
        fs::write(path, text).map_err(|source| RetrievalError::Io {
            path: path.to_owned(),
            source,
        })
    }

    /// Restores a saved index. The dense encoder, if any was used to build
    /// it, must be supplied again and must match the stored fingerprints.
    pub fn load(path: &Path, dense: Option<DenseEncoder>) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.to_owned(),
            source,
        })?;
        let file: IndexFile = serde_json::from_str(&text).map_err(|e| RetrievalError::Format(e.to_string()))?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(RetrievalError::Format(format!(
                "unsupported index {} v{}",
                file.format, file.version
            )));
        }
        let lemmas = file
            .library
            .iter()
            .map(LemmaRecord::from_json)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RetrievalError::Format(e.to_string()))?;
        let library = LemmaLibrary::new(lemmas)?;
        let check = |artifact: &'static str, expected: &Option<String>, found: Option<String>| match (expected, found) {
            (Some(e), Some(f)) if *e != f => Err(RetrievalError::FingerprintMismatch {
                artifact,
                expected: e.clone(),
                found: f,
            }),
            (Some(e), None) => Err(RetrievalError::FingerprintMismatch {
                artifact,
                expected: e.clone(),
                found: "none".into(),
            }),
            _ => Ok(()),
        };
        let fp = &file.fingerprints;
        if fp.library != library_fingerprint(&library) {
            return Err(RetrievalError::Format("library records do not match fingerprint".into()));
        }
        check("tokenizer", &fp.tokenizer, dense.as_ref().map(|d| d.tokenizer.fingerprint()))?;
        check("encoder", &fp.encoder, dense.as_ref().map(|d| d.params.fingerprint()))?;
        let dense = if fp.encoder.is_some() { dense } else { None };
        let n = library.len();
        let sizes_ok = (dense.is_none() || file.embeddings.len() == n)
            && (file.tfidf.is_none() || (file.tfidf_vectors.len() == n && file.count_vectors.len() == n));
        if !sizes_ok {
            return Err(RetrievalError::Format("entry count differs from library size".into()));
        }
        let featurizer = Featurizer::new(file.featurizer).map_err(|e| RetrievalError::Format(e.to_string()))?;
        Ok(Self {
            library,
            featurizer,
            dense,
            embeddings: file.embeddings,
            tfidf: file.tfidf.map(TfidfModel::reindex),
            tfidf_vectors: file.tfidf_vectors,
            count_vectors: file.count_vectors,
            random_seed: file.random_seed,
            fingerprints: file.fingerprints,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    library: Vec<serde_json::Value>,
    featurizer: FeaturizerConfig,
    embeddings: Vec<Vec<f64>>,
    tfidf: Option<TfidfModel>,
    tfidf_vectors: Vec<SparseVector>,
    count_vectors: Vec<SparseVector>,
    random_seed: u64,
    fingerprints: IndexFingerprints,
}
