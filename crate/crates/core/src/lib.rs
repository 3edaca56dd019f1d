//! Proof-step recommendation: next-command prediction and lemma retrieval
//! learned from completed proof traces.
//!
//! The pipeline runs [`corpus`] records through the [`featurizer`] into token
//! streams, which feed both the classical [`baselines`] (TF-IDF n-grams with
//! kNN, logistic regression and overlap scorers) and the [`encoder`], a small
//! self-attention model trained with masked-token pretraining, a command
//! classification head, and a shared-weight (Siamese) cosine scorer.
//! [`retrieval`] ranks a lemma library under any of these scorers and
//! [`eval`] provides top-N accuracy, MRR, bootstrap and significance tests.

pub mod baselines;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod featurizer;
pub mod retrieval;
pub mod tokenizer;

use sha2::{Digest, Sha256};

/// Short hex digest used to bind artifacts to each other.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}
