use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{MaskedSequence, ScoredPair};
use super::params::EncoderParameters;
use super::{EncoderError, TrainConfig};
use crate::tokenizer::{TokenId, MASK_ID, SPECIAL_TOKENS};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adaptive-moment optimiser state over the flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn clip(grads: &mut [f64], max_norm: Option<f64>) {
    if let Some(max) = max_norm {
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > max {
            let s = max / norm;
            grads.iter_mut().for_each(|g| *g *= s);
        }
    }
}

fn apply(params: &mut EncoderParameters, opt: &mut Adam, grads: &mut [f64], cfg: &TrainConfig) {
    clip(grads, cfg.grad_clip);
    opt.step(&mut params.data, grads, cfg.lr);
}

/// Picks `round(mask_rate · eligible)` non-special positions (at least one
/// when the rate is positive) and corrupts them 80/10/10 into `<MASK>`, a
/// random token, or the original token.
pub fn mask_sequence(ids: &[TokenId], mask_rate: f64, vocab_size: usize, rng: &mut ChaCha8Rng) -> MaskedSequence {
    let first_regular = SPECIAL_TOKENS.len() as TokenId;
    let eligible: Vec<usize> = (0..ids.len()).filter(|&t| ids[t] >= first_regular).collect();
    let mut input = ids.to_vec();
    let mut targets = Vec::new();
    if mask_rate <= 0.0 || eligible.is_empty() {
        return MaskedSequence { input, targets };
    }
    let count = ((mask_rate * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    let mut chosen: Vec<usize> = index::sample(rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();
    for pos in chosen {
        targets.push((pos, ids[pos]));
        let r: f64 = rng.gen();
        if r < 0.8 {
            input[pos] = MASK_ID;
        } else if r < 0.9 && vocab_size > first_regular as usize {
            input[pos] = rng.gen_range(first_regular..vocab_size as TokenId);
        }
    }
    MaskedSequence { input, targets }
}

/// One masked-LM optimiser step. Returns `None`, leaving the parameters
/// untouched, when nothing in the batch was selected for masking.
pub fn mlm_step(
    params: &mut EncoderParameters,
    opt: &mut Adam,
    batch: &[Vec<TokenId>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<f64>, EncoderError> {
    if batch.is_empty() {
        return Err(EncoderError::EmptyTrainingSet);
    }
    let masked: Vec<MaskedSequence> = batch
        .iter()
        .map(|ids| mask_sequence(ids, cfg.mask_rate, params.vocab_size, rng))
        .collect();
    if masked.iter().all(|m| m.targets.is_empty()) {
        return Ok(None);
    }
    let mut grads = vec![0.0; params.len()];
    let loss = params.mlm_loss(&masked, Some(&mut grads), Some(rng))?;
    apply(params, opt, &mut grads, cfg);
    Ok(Some(loss))
}

/// Masked-LM pretraining for `cfg.steps` steps on batches drawn uniformly
/// from `corpus`. Returns the loss of every step that masked something.
pub fn pretrain(
    params: &mut EncoderParameters,
    corpus: &[Vec<TokenId>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, EncoderError> {
    if corpus.is_empty() {
        return Err(EncoderError::EmptyTrainingSet);
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(params.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<Vec<TokenId>> = (0..cfg.batch_size)
            .map(|_| corpus[rng.gen_range(0..corpus.len())].clone())
            .collect();
        if let Some(loss) = mlm_step(params, &mut opt, &batch, cfg, &mut rng)? {
            losses.push(loss);
            if step % 500 == 0 {
                log::info!("pretrain step {step}: loss {loss:.4}");
            }
        }
    }
    Ok(losses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassifierRun {
    /// Parameters from the epoch with the lowest validation loss (training
    /// loss when there is no validation set).
    pub params: EncoderParameters,
    pub best_epoch: usize,
    pub epochs: Vec<EpochMetrics>,
}

/// Index of the smallest value; the earliest wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

fn evaluate_classifier(
    params: &EncoderParameters,
    data: &[(Vec<TokenId>, usize)],
) -> Result<(f64, f64), EncoderError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (ids, label) in data {
        let ranked = params.classify_command(ids)?;
        let p = ranked
            .iter()
            .find(|(c, _)| *c == params.commands[*label])
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        loss -= p.max(f64::MIN_POSITIVE).ln();
        if ranked[0].0 == params.commands[*label] {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Cross-entropy training of the command head together with the encoder.
pub fn train_classifier(
    mut params: EncoderParameters,
    train: &[(Vec<TokenId>, usize)],
    valid: &[(Vec<TokenId>, usize)],
    cfg: &TrainConfig,
) -> Result<ClassifierRun, EncoderError> {
    if train.is_empty() {
        return Err(EncoderError::EmptyTrainingSet);
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, EncoderParameters)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[TokenId], usize)> = chunk.iter().map(|&i| (train[i].0.as_slice(), train[i].1)).collect();
            let mut grads = vec![0.0; params.len()];
            let loss = params.classifier_loss(&batch, Some(&mut grads), Some(&mut rng))?;
            total += loss * chunk.len() as f64;
            apply(&mut params, &mut opt, &mut grads, cfg);
        }
        let train_loss = total / train.len() as f64;
        let (valid_loss, valid_accuracy) = if valid.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_classifier(&params, valid)?;
            (Some(l), Some(a))
        };
        log::info!("classifier epoch {epoch}: train {train_loss:.4} valid {valid_loss:?} acc {valid_accuracy:?}");
        let score = valid_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, params.clone()));
        }
        epochs.push(EpochMetrics {
            epoch,
            train_loss,
            valid_loss,
            valid_accuracy,
        });
    }
    let (_, best_epoch, best_params) = best.unwrap_or((f64::INFINITY, 0, params));
    Ok(ClassifierRun {
        params: best_params,
        best_epoch,
        epochs,
    })
}

/// For each ground-truth lemma index, one uniformly drawn different index.
pub fn sample_negatives(truths: &[usize], library_len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, EncoderError> {
    if library_len < 2 {
        return Err(EncoderError::LibraryTooSmall(library_len));
    }
    Ok(truths
        .iter()
        .map(|&t| {
            let r = rng.gen_range(0..library_len - 1);
            if r >= t {
                r + 1
            } else {
                r
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SiameseRun {
    pub params: EncoderParameters,
    pub epoch_losses: Vec<f64>,
}

/// Trains the shared encoder so that cosine scores approach 1 on observed
/// `(sequent, lemma)` pairs and 0 on one sampled negative per pair.
/// Negatives are redrawn every epoch.
pub fn siamese_train(
    mut params: EncoderParameters,
    positives: &[(Vec<TokenId>, usize)],
    library: &[Vec<TokenId>],
    cfg: &TrainConfig,
) -> Result<SiameseRun, EncoderError> {
    if positives.is_empty() {
        return Err(EncoderError::EmptyTrainingSet);
    }
    if library.len() < 2 {
        return Err(EncoderError::LibraryTooSmall(library.len()));
    }
    if let Some(&(_, bad)) = positives.iter().find(|(_, l)| *l >= library.len()) {
        return Err(EncoderError::Config(format!("lemma index {bad} outside library")));
    }
    cfg.validate()?;
    let inputs: Vec<&[TokenId]> = positives
        .iter()
        .map(|(ids, _)| ids.as_slice())
        .chain(library.iter().map(Vec::as_slice))
        .collect();
    params.center_siamese(&inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(params.len());
    let truths: Vec<usize> = positives.iter().map(|(_, l)| *l).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let negatives = sample_negatives(&truths, library.len(), &mut rng)?;
        let mut pairs: Vec<ScoredPair<'_>> = Vec::with_capacity(2 * positives.len());
        for ((ids, truth), neg) in positives.iter().zip(&negatives) {
            pairs.push(ScoredPair {
                left: ids,
                right: &library[*truth],
                label: 1.0,
            });
            pairs.push(ScoredPair {
                left: ids,
                right: &library[*neg],
                label: 0.0,
            });
        }
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in pairs.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; params.len()];
            let loss = params.siamese_loss(chunk, Some(&mut grads), Some(&mut rng))?;
            total += loss * chunk.len() as f64;
            apply(&mut params, &mut opt, &mut grads, cfg);
        }
        let mean = total / pairs.len() as f64;
        log::info!("siamese epoch {epoch}: loss {mean:.4}");
        epoch_losses.push(mean);
    }
    Ok(SiameseRun { params, epoch_losses })
}
