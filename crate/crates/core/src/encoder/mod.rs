//! A compact self-attention encoder with masked-token pretraining, a command
//! classification head and a shared-weight cosine scorer, trained with
//! hand-written backpropagation in double precision.

mod gradcheck;
mod kernels;
mod model;
mod params;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::TokenId;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, TensorCheck};
pub use model::{cosine, MaskedSequence, ScoredPair};
pub use params::{EncoderParameters, Layout, TensorInfo, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{
    argmin, mask_sequence, mlm_step, pretrain, sample_negatives, siamese_train, train_classifier, Adam,
    ClassifierRun, EpochMetrics, SiameseRun,
};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence of {len} tokens exceeds max_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token id {id} outside vocabulary of {vocab}")]
    BadTokenId { id: TokenId, vocab: usize },
    #[error("no position was selected for masking")]
    NothingMasked,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("lemma library needs at least 2 entries, got {0}")]
    LibraryTooSmall(usize),
    #[error("tokenizer fingerprint mismatch: expected {expected}, checkpoint has {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            ffn_dim: 256,
            max_len: 256,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::Config(m.to_owned()));
        if self.d_model == 0 || self.n_heads == 0 || self.ffn_dim == 0 || self.max_len == 0 {
            return bad("dimensions must be positive");
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be divisible by n_heads");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Optimiser steps for pretraining.
    pub steps: usize,
    /// Passes over the data for the task heads.
    pub epochs: usize,
    pub mask_rate: f64,
    /// Global gradient-norm limit.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 4,
            steps: 5000,
            epochs: 10,
            mask_rate: 0.15,
            grad_clip: Some(1.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(EncoderError::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(EncoderError::Config("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(EncoderError::Config("mask rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
