use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::kernels::{
    axpy, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, softmax,
};
use super::params::EncoderParameters;
use super::EncoderError;
use crate::tokenizer::{TokenId, PAD_ID};

struct LayerCache {
    xhat1: Vec<f64>,
    rstd1: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `heads × len × len` attention probabilities.
    probs: Vec<f64>,
    ctx: Vec<f64>,
    drop1: Option<Vec<f64>>,
    xhat2: Vec<f64>,
    rstd2: Vec<f64>,
    c: Vec<f64>,
    u: Vec<f64>,
    act: Vec<f64>,
    drop2: Option<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct ForwardCache {
    ids: Vec<TokenId>,
    layers: Vec<LayerCache>,
    xhat_f: Vec<f64>,
    rstd_f: Vec<f64>,
    /// Final contextual vectors, `len × d_model`.
    pub out: Vec<f64>,
}

impl ForwardCache {
    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }
}

fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

impl EncoderParameters {
    fn check_ids(&self, ids: &[TokenId]) -> Result<(), EncoderError> {
        if ids.is_empty() {
            return Err(EncoderError::EmptySequence);
        }
        if ids.len() > self.config.max_len {
            return Err(EncoderError::TooLong {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            return Err(EncoderError::BadTokenId {
                id,
                vocab: self.vocab_size,
            });
        }
        Ok(())
    }

    /// Pre-norm transformer forward pass. Dropout applies only when an RNG
    /// is supplied.
    pub(crate) fn forward_cached(
        &self,
        ids: &[TokenId],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache, EncoderError> {
        self.check_ids(ids)?;
        let cfg = &self.config;
        let (n, d, f, h) = (ids.len(), cfg.d_model, cfg.ffn_dim, cfg.n_heads);
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();
        let p = &self.data;
        let lay = &self.layout;
        let rate = if rng.is_some() { cfg.dropout } else { 0.0 };

        let tok = &p[lay.tok_emb.clone()];
        let pos = &p[lay.pos_emb.clone()];
        let mut x = vec![0.0; n * d];
        for (t, &id) in ids.iter().enumerate() {
            let row = &mut x[t * d..(t + 1) * d];
            row.copy_from_slice(&tok[id as usize * d..(id as usize + 1) * d]);
            axpy(1.0, &pos[t * d..(t + 1) * d], row);
        }
        // Padding keys are hidden unless the whole sequence is padding.
        let masked: Vec<bool> = ids.iter().map(|&id| id == PAD_ID).collect();
        let mask_keys = masked.iter().any(|&m| !m);

        let mut layers = Vec::with_capacity(lay.layers.len());
        for l in &lay.layers {
            let (a, xhat1, rstd1) = layer_norm(&x, d, &p[l.ln1_g.clone()], &p[l.ln1_b.clone()]);
            let q = linear(&a, n, d, &p[l.wq.clone()], &p[l.bq.clone()], d);
            let k = linear(&a, n, d, &p[l.wk.clone()], &p[l.bk.clone()], d);
            let v = linear(&a, n, d, &p[l.wv.clone()], &p[l.bv.clone()], d);
            let mut probs = vec![0.0; h * n * n];
            let mut ctx = vec![0.0; n * d];
            let mut qh = vec![0.0; dh];
            for head in 0..h {
                let off = head * dh;
                for i in 0..n {
                    qh.copy_from_slice(&q[i * d + off..i * d + off + dh]);
                    let row = &mut probs[(head * n + i) * n..(head * n + i + 1) * n];
                    for j in 0..n {
                        row[j] = if mask_keys && masked[j] {
                            f64::NEG_INFINITY
                        } else {
                            dot(&qh, &k[j * d + off..j * d + off + dh]) * scale
                        };
                    }
                    softmax(row);
                    let out = &mut ctx[i * d + off..i * d + off + dh];
                    for j in 0..n {
                        if row[j] != 0.0 {
                            axpy(row[j], &v[j * d + off..j * d + off + dh], out);
                        }
                    }
                }
            }
            let mut o = linear(&ctx, n, d, &p[l.wo.clone()], &p[l.bo.clone()], d);
            let drop1 = match rng.as_deref_mut() {
                Some(r) if rate > 0.0 => {
                    let m = dropout_mask(n * d, rate, r);
                    o.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            axpy(1.0, &o, &mut x);

            let (c, xhat2, rstd2) = layer_norm(&x, d, &p[l.ln2_g.clone()], &p[l.ln2_b.clone()]);
            let u = linear(&c, n, d, &p[l.w1.clone()], &p[l.b1.clone()], f);
            let act: Vec<f64> = u.iter().map(|&v| gelu(v)).collect();
            let mut y = linear(&act, n, f, &p[l.w2.clone()], &p[l.b2.clone()], d);
            let drop2 = match rng.as_deref_mut() {
                Some(r) if rate > 0.0 => {
                    let m = dropout_mask(n * d, rate, r);
                    y.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            axpy(1.0, &y, &mut x);
            layers.push(LayerCache {
                xhat1,
                rstd1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                drop1,
                xhat2,
                rstd2,
                c,
                u,
                act,
                drop2,
            });
        }
        let (out, xhat_f, rstd_f) = layer_norm(&x, d, &p[lay.lnf_g.clone()], &p[lay.lnf_b.clone()]);
        Ok(ForwardCache {
            ids: ids.to_vec(),
            layers,
            xhat_f,
            rstd_f,
            out,
        })
    }

    /// Accumulates parameter gradients for `dout = ∂loss/∂out` into `grads`.
    pub(crate) fn backward(&self, cache: &ForwardCache, dout: &[f64], grads: &mut [f64]) {
        let cfg = &self.config;
        let (n, d, f, h) = (cache.len(), cfg.d_model, cfg.ffn_dim, cfg.n_heads);
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();
        let p = &self.data;
        let lay = &self.layout;

        let mut dx = {
            let (dg, rest) = split_pair(grads, &lay.lnf_g, &lay.lnf_b);
            layer_norm_backward(dout, &cache.xhat_f, &cache.rstd_f, d, &p[lay.lnf_g.clone()], dg, rest)
        };

        for (l, lc) in lay.layers.iter().zip(&cache.layers).rev() {
            // Feed-forward branch.
            let mut dy = dx.clone();
            if let Some(m) = &lc.drop2 {
                dy.iter_mut().zip(m).for_each(|(v, s)| *v *= s);
            }
            let dact = {
                let (dw, db) = split_pair(grads, &l.w2, &l.b2);
                linear_backward(&lc.act, n, f, &p[l.w2.clone()], d, &dy, dw, db)
            };
            let du: Vec<f64> = dact.iter().zip(&lc.u).map(|(g, &u)| g * gelu_grad(u)).collect();
            let dc = {
                let (dw, db) = split_pair(grads, &l.w1, &l.b1);
                linear_backward(&lc.c, n, d, &p[l.w1.clone()], f, &du, dw, db)
            };
            let dxn = {
                let (dg, db) = split_pair(grads, &l.ln2_g, &l.ln2_b);
                layer_norm_backward(&dc, &lc.xhat2, &lc.rstd2, d, &p[l.ln2_g.clone()], dg, db)
            };
            axpy(1.0, &dxn, &mut dx);

            // Attention branch.
            let mut do_ = dx.clone();
            if let Some(m) = &lc.drop1 {
                do_.iter_mut().zip(m).for_each(|(v, s)| *v *= s);
            }
            let dctx = {
                let (dw, db) = split_pair(grads, &l.wo, &l.bo);
                linear_backward(&lc.ctx, n, d, &p[l.wo.clone()], d, &do_, dw, db)
            };
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            let mut dprob = vec![0.0; n];
            for head in 0..h {
                let off = head * dh;
                for i in 0..n {
                    let row = &lc.probs[(head * n + i) * n..(head * n + i + 1) * n];
                    let dci = &dctx[i * d + off..i * d + off + dh];
                    for j in 0..n {
                        dprob[j] = dot(dci, &lc.v[j * d + off..j * d + off + dh]);
                        if row[j] != 0.0 {
                            axpy(row[j], dci, &mut dv[j * d + off..j * d + off + dh]);
                        }
                    }
                    let inner = dot(row, &dprob);
                    for j in 0..n {
                        if row[j] == 0.0 {
                            continue;
                        }
                        let ds = row[j] * (dprob[j] - inner) * scale;
                        axpy(ds, &lc.k[j * d + off..j * d + off + dh], &mut dq[i * d + off..i * d + off + dh]);
                        axpy(ds, &lc.q[i * d + off..i * d + off + dh], &mut dk[j * d + off..j * d + off + dh]);
                    }
                }
            }
            let mut da = {
                let (dw, db) = split_pair(grads, &l.wq, &l.bq);
                linear_backward(&lc.a, n, d, &p[l.wq.clone()], d, &dq, dw, db)
            };
            {
                let (dw, db) = split_pair(grads, &l.wk, &l.bk);
                let g = linear_backward(&lc.a, n, d, &p[l.wk.clone()], d, &dk, dw, db);
                axpy(1.0, &g, &mut da);
            }
            {
                let (dw, db) = split_pair(grads, &l.wv, &l.bv);
                let g = linear_backward(&lc.a, n, d, &p[l.wv.clone()], d, &dv, dw, db);
                axpy(1.0, &g, &mut da);
            }
            let dxn = {
                let (dg, db) = split_pair(grads, &l.ln1_g, &l.ln1_b);
                layer_norm_backward(&da, &lc.xhat1, &lc.rstd1, d, &p[l.ln1_g.clone()], dg, db)
            };
            axpy(1.0, &dxn, &mut dx);
        }

        for (t, &id) in cache.ids.iter().enumerate() {
            let row = &dx[t * d..(t + 1) * d];
            let te = lay.tok_emb.start + id as usize * d;
            axpy(1.0, row, &mut grads[te..te + d]);
            let pe = lay.pos_emb.start + t * d;
            axpy(1.0, row, &mut grads[pe..pe + d]);
        }
    }

    /// Contextual vectors (`len × d_model`, row-major) in inference mode.
    pub fn forward(&self, ids: &[TokenId]) -> Result<Vec<f64>, EncoderError> {
        Ok(self.forward_cached(ids, None)?.out)
    }

    /// Attention probabilities per layer, each `heads × len × len`.
    pub fn attention_maps(&self, ids: &[TokenId]) -> Result<Vec<Vec<f64>>, EncoderError> {
        Ok(self
            .forward_cached(ids, None)?
            .layers
            .into_iter()
            .map(|l| l.probs)
            .collect())
    }

    fn command_logits(&self, out: &[f64]) -> Vec<f64> {
        let d = self.config.d_model;
        let c = self.n_commands();
        linear(&out[..d], 1, d, &self.data[self.layout.cls_w.clone()], &self.data[self.layout.cls_b.clone()], c)
    }

    /// Softmax over the command vocabulary from the position-0 vector,
    /// most probable first (ties by command name).
    pub fn classify_command(&self, ids: &[TokenId]) -> Result<Vec<(String, f64)>, EncoderError> {
        if self.commands.is_empty() {
            return Err(EncoderError::Config("classifier head has no commands".into()));
        }
        let out = self.forward(ids)?;
        let mut probs = self.command_logits(&out);
        softmax(&mut probs);
        let mut ranked: Vec<(String, f64)> = self.commands.iter().cloned().zip(probs).collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(ranked)
    }

    /// Mean of the contextual vectors over non-padding positions.
    pub fn embed_mean(&self, ids: &[TokenId]) -> Result<Vec<f64>, EncoderError> {
        let out = self.forward(ids)?;
        Ok(mean_pool(&out, ids, self.config.d_model))
    }

    fn project(&self, pooled: &[f64]) -> Vec<f64> {
        let d = self.config.d_model;
        linear(
            pooled,
            1,
            d,
            &self.data[self.layout.sia_w.clone()],
            &self.data[self.layout.sia_b.clone()],
            d,
        )
    }

    /// The mean-pooled vector mapped through the siamese projection; this is
    /// the space lemma and sequent embeddings are compared in.
    pub fn siamese_embed(&self, ids: &[TokenId]) -> Result<Vec<f64>, EncoderError> {
        Ok(self.project(&self.embed_mean(ids)?))
    }

    /// Cosine of the two projected mean-pooled embeddings, both computed with
    /// the same parameters.
    pub fn siamese_score(&self, a: &[TokenId], b: &[TokenId]) -> Result<f64, EncoderError> {
        Ok(cosine(&self.siamese_embed(a)?, &self.siamese_embed(b)?))
    }

    /// Sets the siamese bias so the projected centroid of `inputs` is the
    /// origin, leaving the projection matrix untouched.
    pub fn center_siamese(&mut self, inputs: &[&[TokenId]]) -> Result<(), EncoderError> {
        if inputs.is_empty() {
            return Err(EncoderError::EmptyTrainingSet);
        }
        let d = self.config.d_model;
        let mut centroid = vec![0.0; d];
        for ids in inputs {
            axpy(1.0 / inputs.len() as f64, &self.embed_mean(ids)?, &mut centroid);
        }
        let zero = vec![0.0; d];
        let shifted = linear(&centroid, 1, d, &self.data[self.layout.sia_w.clone()], &zero, d);
        for (b, v) in self.data[self.layout.sia_b.clone()].iter_mut().zip(shifted) {
            *b = -v;
        }
        Ok(())
    }
}

fn split_pair<'a>(
    grads: &'a mut [f64],
    first: &std::ops::Range<usize>,
    second: &std::ops::Range<usize>,
) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(first.end <= second.start);
    let (lo, hi) = grads.split_at_mut(second.start);
    (&mut lo[first.clone()], &mut hi[..second.len()])
}

fn pooled_positions(ids: &[TokenId]) -> Vec<usize> {
    let keep: Vec<usize> = (0..ids.len()).filter(|&t| ids[t] != PAD_ID).collect();
    if keep.is_empty() {
        (0..ids.len()).collect()
    } else {
        keep
    }
}

pub(crate) fn mean_pool(out: &[f64], ids: &[TokenId], d: usize) -> Vec<f64> {
    let pos = pooled_positions(ids);
    let mut e = vec![0.0; d];
    for &t in &pos {
        axpy(1.0, &out[t * d..(t + 1) * d], &mut e);
    }
    let inv = 1.0 / pos.len() as f64;
    e.iter_mut().for_each(|v| *v *= inv);
    e
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("zero-norm embedding, cosine taken as 0");
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// One sequence with masked-token prediction targets `(position, original id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    pub input: Vec<TokenId>,
    pub targets: Vec<(usize, TokenId)>,
}

/// A labelled pair for the shared-weight scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair<'a> {
    pub left: &'a [TokenId],
    pub right: &'a [TokenId],
    pub label: f64,
}

impl EncoderParameters {
    /// Mean cross-entropy over every masked position in the batch; adds the
    /// gradient to `grads` when given.
    pub fn mlm_loss(
        &self,
        batch: &[MaskedSequence],
        mut grads: Option<&mut [f64]>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, EncoderError> {
        let total: usize = batch.iter().map(|s| s.targets.len()).sum();
        if total == 0 {
            return Err(EncoderError::NothingMasked);
        }
        let d = self.config.d_model;
        let v = self.vocab_size;
        let w = &self.data[self.layout.mlm_w.clone()];
        let b = &self.data[self.layout.mlm_b.clone()];
        let inv = 1.0 / total as f64;
        let mut loss = 0.0;
        for seq in batch {
            if seq.targets.is_empty() {
                continue;
            }
            let cache = self.forward_cached(&seq.input, rng.as_deref_mut())?;
            let mut dout = vec![0.0; cache.out.len()];
            for &(pos, target) in &seq.targets {
                let hrow = &cache.out[pos * d..(pos + 1) * d];
                let mut probs = linear(hrow, 1, d, w, b, v);
                softmax(&mut probs);
                loss -= probs[target as usize].max(f64::MIN_POSITIVE).ln() * inv;
                if let Some(g) = grads.as_deref_mut() {
                    probs[target as usize] -= 1.0;
                    probs.iter_mut().for_each(|p| *p *= inv);
                    let (dw, db) = split_pair(g, &self.layout.mlm_w, &self.layout.mlm_b);
                    let dh = linear_backward(hrow, 1, d, w, v, &probs, dw, db);
                    axpy(1.0, &dh, &mut dout[pos * d..(pos + 1) * d]);
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                self.backward(&cache, &dout, g);
            }
        }
        Ok(loss)
    }

    /// Mean cross-entropy of the command head over `(ids, command index)`.
    pub fn classifier_loss(
        &self,
        batch: &[(&[TokenId], usize)],
        mut grads: Option<&mut [f64]>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, EncoderError> {
        if batch.is_empty() {
            return Err(EncoderError::EmptyTrainingSet);
        }
        let d = self.config.d_model;
        let c = self.n_commands();
        let inv = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(ids, label) in batch {
            if label >= c {
                return Err(EncoderError::Config(format!("label {label} outside {c} commands")));
            }
            let cache = self.forward_cached(ids, rng.as_deref_mut())?;
            let mut probs = self.command_logits(&cache.out);
            softmax(&mut probs);
            loss -= probs[label].max(f64::MIN_POSITIVE).ln() * inv;
            if let Some(g) = grads.as_deref_mut() {
                probs[label] -= 1.0;
                probs.iter_mut().for_each(|p| *p *= inv);
                let w = &self.data[self.layout.cls_w.clone()];
                let (dw, db) = split_pair(g, &self.layout.cls_w, &self.layout.cls_b);
                let dh = linear_backward(&cache.out[..d], 1, d, w, c, &probs, dw, db);
                let mut dout = vec![0.0; cache.out.len()];
                dout[..d].copy_from_slice(&dh);
                self.backward(&cache, &dout, g);
            }
        }
        Ok(loss)
    }

    /// Mean squared error between the pair's siamese cosine and its label.
    pub fn siamese_loss(
        &self,
        batch: &[ScoredPair<'_>],
        mut grads: Option<&mut [f64]>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, EncoderError> {
        if batch.is_empty() {
            return Err(EncoderError::EmptyTrainingSet);
        }
        let d = self.config.d_model;
        let inv = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for pair in batch {
            let ca = self.forward_cached(pair.left, rng.as_deref_mut())?;
            let cb = self.forward_cached(pair.right, rng.as_deref_mut())?;
            let ma = mean_pool(&ca.out, pair.left, d);
            let mb = mean_pool(&cb.out, pair.right, d);
            let ea = self.project(&ma);
            let eb = self.project(&mb);
            let (na, nb) = (dot(&ea, &ea).sqrt(), dot(&eb, &eb).sqrt());
            if na == 0.0 || nb == 0.0 {
                loss += pair.label * pair.label * inv;
                continue;
            }
            let cos = dot(&ea, &eb) / (na * nb);
            let err = cos - pair.label;
            loss += err * err * inv;
            if let Some(g) = grads.as_deref_mut() {
                let dcos = 2.0 * err * inv;
                let proj = &self.data[self.layout.sia_w.clone()];
                let (sw, sb) = (self.layout.sia_w.clone(), self.layout.sia_b.clone());
                for (cache, ids, pooled, e, other, ne, no) in [
                    (&ca, pair.left, &ma, &ea, &eb, na, nb),
                    (&cb, pair.right, &mb, &eb, &ea, nb, na),
                ] {
                    let dz: Vec<f64> = e
                        .iter()
                        .zip(other)
                        .map(|(x, y)| dcos * (y / (ne * no) - cos * x / (ne * ne)))
                        .collect();
                    let (gw, gb) = g[sw.start..sb.end].split_at_mut(sw.len());
                    let de = linear_backward(pooled, 1, d, proj, d, &dz, gw, gb);
                    let pos = pooled_positions(ids);
                    let share = 1.0 / pos.len() as f64;
                    let mut dout = vec![0.0; cache.out.len()];
                    for &t in &pos {
                        axpy(share, &de, &mut dout[t * d..(t + 1) * d]);
                    }
                    self.backward(cache, &dout, g);
                }
            }
        }
        Ok(loss)
    }
}
