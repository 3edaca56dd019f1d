use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderError};

pub const CHECKPOINT_FORMAT: &str = "proofrec-encoder";
pub const CHECKPOINT_VERSION: u32 = 1;

const EMBED_STD: f64 = 1.0;
const HEAD_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerLayout {
    pub ln1_g: Range<usize>,
    pub ln1_b: Range<usize>,
    pub wq: Range<usize>,
    pub bq: Range<usize>,
    pub wk: Range<usize>,
    pub bk: Range<usize>,
    pub wv: Range<usize>,
    pub bv: Range<usize>,
    pub wo: Range<usize>,
    pub bo: Range<usize>,
    pub ln2_g: Range<usize>,
    pub ln2_b: Range<usize>,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
}

/// Offsets of every named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub(crate) tok_emb: Range<usize>,
    pub(crate) pos_emb: Range<usize>,
    pub(crate) layers: Vec<LayerLayout>,
    pub(crate) lnf_g: Range<usize>,
    pub(crate) lnf_b: Range<usize>,
    pub(crate) mlm_w: Range<usize>,
    pub(crate) mlm_b: Range<usize>,
    /// Linear map applied to mean-pooled vectors before the cosine.
    pub(crate) sia_w: Range<usize>,
    pub(crate) sia_b: Range<usize>,
    pub(crate) cls_w: Range<usize>,
    pub(crate) cls_b: Range<usize>,
    tensors: Vec<TensorInfo>,
    total: usize,
}

struct Builder {
    tensors: Vec<TensorInfo>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize]) -> Range<usize> {
        let len: usize = shape.iter().product();
        let range = self.next..self.next + len;
        self.next += len;
        self.tensors.push(TensorInfo {
            name,
            shape: shape.to_vec(),
            range: range.clone(),
        });
        range
    }
}

impl Layout {
    pub fn new(config: &EncoderConfig, vocab_size: usize, n_commands: usize) -> Self {
        let d = config.d_model;
        let f = config.ffn_dim;
        let mut b = Builder {
            tensors: Vec::new(),
            next: 0,
        };
        let tok_emb = b.add("tok_emb".into(), &[vocab_size, d]);
        let pos_emb = b.add("pos_emb".into(), &[config.max_len, d]);
        let layers = (0..config.n_layers)
            .map(|l| {
                let mut t = |part: &str, shape: &[usize]| b.add(format!("layer{l}.{part}"), shape);
                LayerLayout {
                    ln1_g: t("ln1.gain", &[d]),
                    ln1_b: t("ln1.shift", &[d]),
                    wq: t("attn.wq", &[d, d]),
                    bq: t("attn.bq", &[d]),
                    wk: t("attn.wk", &[d, d]),
                    bk: t("attn.bk", &[d]),
                    wv: t("attn.wv", &[d, d]),
                    bv: t("attn.bv", &[d]),
                    wo: t("attn.wo", &[d, d]),
                    bo: t("attn.bo", &[d]),
                    ln2_g: t("ln2.gain", &[d]),
                    ln2_b: t("ln2.shift", &[d]),
                    w1: t("ffn.w1", &[d, f]),
                    b1: t("ffn.b1", &[f]),
                    w2: t("ffn.w2", &[f, d]),
                    b2: t("ffn.b2", &[d]),
                }
            })
            .collect();
        let lnf_g = b.add("final_ln.gain".into(), &[d]);
        let lnf_b = b.add("final_ln.shift".into(), &[d]);
        let mlm_w = b.add("mlm.w".into(), &[d, vocab_size]);
        let mlm_b = b.add("mlm.b".into(), &[vocab_size]);
        let sia_w = b.add("siamese.proj".into(), &[d, d]);
        let sia_b = b.add("siamese.bias".into(), &[d]);
        let cls_w = b.add("cls.w".into(), &[d, n_commands]);
        let cls_b = b.add("cls.b".into(), &[n_commands]);
        Self {
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            mlm_w,
            mlm_b,
            sia_w,
            sia_b,
            cls_w,
            cls_b,
            total: b.next,
            tensors: b.tensors,
        }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// All encoder and head weights in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParameters {
    pub config: EncoderConfig,
    pub vocab_size: usize,
    /// Command vocabulary of the classifier head, in output order.
    pub commands: Vec<String>,
    /// Fingerprint of the tokenizer the ids come from.
    pub tokenizer_fingerprint: String,
    pub(crate) layout: Layout,
    pub data: Vec<f64>,
}

impl EncoderParameters {
    /// Random initialisation: small normal embeddings and heads, scaled
    /// normal projections, unit layer-norm gains, zero biases and an
    /// identity siamese projection.
    pub fn init(
        config: EncoderConfig,
        vocab_size: usize,
        commands: Vec<String>,
        tokenizer_fingerprint: impl Into<String>,
    ) -> Result<Self, EncoderError> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(EncoderError::Config("vocabulary is empty".into()));
        }
        let layout = Layout::new(&config, vocab_size, commands.len());
        let mut data = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut fill = |range: &Range<usize>, std: f64, data: &mut [f64]| {
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut data[range.clone()] {
                *v = normal.sample(&mut rng);
            }
        };
        let d = config.d_model as f64;
        let depth = (2 * config.n_layers.max(1)) as f64;
        fill(&layout.tok_emb, EMBED_STD, &mut data);
        fill(&layout.pos_emb, EMBED_STD, &mut data);
        for l in &layout.layers {
            for w in [&l.wq, &l.wk, &l.wv] {
                fill(w, 1.0 / d.sqrt(), &mut data);
            }
            fill(&l.wo, 1.0 / (d * depth).sqrt(), &mut data);
            fill(&l.w1, 1.0 / d.sqrt(), &mut data);
            fill(&l.w2, 1.0 / (config.ffn_dim as f64 * depth).sqrt(), &mut data);
            data[l.ln1_g.clone()].fill(1.0);
            data[l.ln2_g.clone()].fill(1.0);
        }
        data[layout.lnf_g.clone()].fill(1.0);
        fill(&layout.mlm_w, HEAD_STD, &mut data);
        for i in 0..config.d_model {
            data[layout.sia_w.start + i * config.d_model + i] = 1.0;
        }
        fill(&layout.cls_w, HEAD_STD, &mut data);
        Ok(Self {
            config,
            vocab_size,
            commands,
            tokenizer_fingerprint: tokenizer_fingerprint.into(),
            layout,
            data,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.tensor(name).map(|t| &self.data[t.range.clone()])
    }

    pub fn n_commands(&self) -> usize {
        self.commands.len()
    }

    pub fn command_index(&self, command: &str) -> Option<usize> {
        self.commands.iter().position(|c| c == command)
    }

    /// Replaces the classifier head with a freshly initialised one for a new
    /// command vocabulary, keeping the encoder weights.
    pub fn with_commands(&self, commands: Vec<String>, seed: u64) -> Self {
        let layout = Layout::new(&self.config, self.vocab_size, commands.len());
        let mut data = vec![0.0; layout.total];
        let keep = self.layout.cls_w.start;
        data[..keep].copy_from_slice(&self.data[..keep]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, HEAD_STD).expect("positive std");
        for v in &mut data[layout.cls_w.clone()] {
            *v = normal.sample(&mut rng);
        }
        Self {
            config: self.config.clone(),
            vocab_size: self.vocab_size,
            commands,
            tokenizer_fingerprint: self.tokenizer_fingerprint.clone(),
            layout,
            data,
        }
    }

    /// Fingerprint of the exact weights, used to bind indexes to checkpoints.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.data.len() * 8 + 64);
        bytes.extend_from_slice(self.tokenizer_fingerprint.as_bytes());
        for c in &self.commands {
            bytes.extend_from_slice(c.as_bytes());
            bytes.push(0);
        }
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::fingerprint(&bytes)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab_size: self.vocab_size,
            commands: self.commands.clone(),
            tokenizer_fingerprint: self.tokenizer_fingerprint.clone(),
            tensors: self
                .layout
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: self.data[t.range.clone()].to_vec(),
                })
                .collect(),
        };
        let text = serde_json::to_string(&ckpt).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|source| EncoderError::Io {
            path: path.to_owned(),
            source,
        })
    }

    /// Loads a checkpoint, checking every tensor shape and, when given, the
    /// tokenizer fingerprint.
    pub fn load(path: &Path, expected_tokenizer: Option<&str>) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
            path: path.to_owned(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(EncoderError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if let Some(expected) = expected_tokenizer {
            if expected != ckpt.tokenizer_fingerprint {
                return Err(EncoderError::FingerprintMismatch {
                    expected: expected.to_owned(),
                    found: ckpt.tokenizer_fingerprint,
                });
            }
        }
        ckpt.config.validate()?;
        let layout = Layout::new(&ckpt.config, ckpt.vocab_size, ckpt.commands.len());
        if layout.tensors.len() != ckpt.tensors.len() {
            return Err(EncoderError::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.tensors.len(),
                ckpt.tensors.len()
            )));
        }
        let mut data = vec![0.0; layout.total];
        for (info, t) in layout.tensors.iter().zip(&ckpt.tensors) {
            if info.name != t.name || info.shape != t.shape || t.data.len() != info.range.len() {
                return Err(EncoderError::Checkpoint(format!(
                    "tensor {} has shape {:?}, expected {} {:?}",
                    t.name, t.shape, info.name, info.shape
                )));
            }
            data[info.range.clone()].copy_from_slice(&t.data);
        }
        let params = Self {
            config: ckpt.config,
            vocab_size: ckpt.vocab_size,
            commands: ckpt.commands,
            tokenizer_fingerprint: ckpt.tokenizer_fingerprint,
            layout,
            data,
        };
        if !params.all_finite() {
            return Err(EncoderError::Checkpoint("non-finite weight".into()));
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: EncoderConfig,
    vocab_size: usize,
    commands: Vec<String>,
    tokenizer_fingerprint: String,
    tensors: Vec<NamedTensor>,
}
