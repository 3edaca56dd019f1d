use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Weight decay on the class weights (biases are not penalised).
    pub l2: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.5,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression over sparse features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Class labels, sorted.
    classes: Vec<String>,
    n_features: usize,
    /// Row-major `classes × n_features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn linear_train(
    vectors: &[SparseVector],
    labels: &[String],
    config: &LinearConfig,
) -> Result<LinearModel, BaselineError> {
    if vectors.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if vectors.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    if config.batch_size == 0 || !(config.lr > 0.0) || !(config.l2 >= 0.0) {
        return Err(BaselineError::BadConfig(format!("{config:?}")));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(BaselineError::SingleClass(classes.len()));
    }
    let n_features = vectors
        .iter()
        .flat_map(|v| v.entries().iter().map(|&(id, _)| id as usize + 1))
        .max()
        .unwrap_or(0);
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();

    let mut model = LinearModel {
        weights: vec![0.0; classes.len() * n_features],
        bias: vec![0.0; classes.len()],
        classes,
        n_features,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&SparseVector> = batch.iter().map(|&i| &vectors[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            model.step(&xs, &ys, config.lr, config.l2);
        }
    }
    Ok(model)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl LinearModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Class index of a label, if it was seen in training.
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    /// Raw class scores; features beyond the trained dimension are ignored.
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (c, zc) in z.iter_mut().enumerate() {
            let row = &self.weights[c * self.n_features..(c + 1) * self.n_features];
            for &(id, v) in x.entries() {
                if let Some(w) = row.get(id as usize) {
                    *zc += w * v;
                }
            }
        }
        z
    }

    pub fn probabilities(&self, x: &SparseVector) -> Vec<f64> {
        let mut z = self.scores(x);
        softmax_in_place(&mut z);
        z
    }

    /// Classes ranked by probability, ties broken by label.
    pub fn predict(&self, x: &SparseVector) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self
            .classes
            .iter()
            .cloned()
            .zip(self.probabilities(x))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        ranked
    }

    /// Mean cross-entropy plus `l2/2 · ‖W‖²`, and its gradient.
    pub fn loss_and_grad(&self, xs: &[&SparseVector], ys: &[usize], l2: f64) -> (f64, LinearGradient) {
        let n = xs.len() as f64;
        let mut grad = LinearGradient {
            weights: self.weights.iter().map(|w| l2 * w).collect(),
            bias: vec![0.0; self.bias.len()],
        };
        let mut loss = 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        for (x, &y) in xs.iter().zip(ys) {
            let mut p = self.probabilities(x);
            loss -= p[y].max(f64::MIN_POSITIVE).ln() / n;
            p[y] -= 1.0;
            for (c, &dc) in p.iter().enumerate() {
                grad.bias[c] += dc / n;
                let row = &mut grad.weights[c * self.n_features..(c + 1) * self.n_features];
                for &(id, v) in x.entries() {
                    if let Some(g) = row.get_mut(id as usize) {
                        *g += dc * v / n;
                    }
                }
            }
        }
        (loss, grad)
    }

    fn step(&mut self, xs: &[&SparseVector], ys: &[usize], lr: f64, l2: f64) {
        let n = xs.len() as f64;
        let decay = 1.0 - lr * l2;
        if decay != 1.0 {
            self.weights.iter_mut().for_each(|w| *w *= decay);
        }
        let deltas: Vec<Vec<f64>> = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let mut p = self.probabilities(x);
                p[y] -= 1.0;
                p
            })
            .collect();
        for (x, p) in xs.iter().zip(&deltas) {
            for (c, &dc) in p.iter().enumerate() {
                self.bias[c] -= lr * dc / n;
                let row = &mut self.weights[c * self.n_features..(c + 1) * self.n_features];
                for &(id, v) in x.entries() {
                    row[id as usize] -= lr * dc * v / n;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn v(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied())
    }

    fn toy() -> (Vec<SparseVector>, Vec<String>) {
        let xs = vec![
            v(&[(0, 1.0), (2, 0.3)]),
            v(&[(0, 0.8), (3, 0.5)]),
            v(&[(0, 0.9)]),
            v(&[(1, 1.0), (2, 0.3)]),
            v(&[(1, 0.7), (3, 0.4)]),
            v(&[(1, 0.9)]),
        ];
        let ys = ["pos", "pos", "pos", "neg", "neg", "neg"].map(String::from).to_vec();
        (xs, ys)
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let (xs, ys) = toy();
        let m = linear_train(&xs, &ys, &LinearConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(&m.predict(x)[0].0, y);
        }
    }

    #[test]
    fn zero_input_ranks_by_bias() {
        let (xs, mut ys) = toy();
        ys[3] = "pos".into();
        let m = linear_train(&xs, &ys, &LinearConfig::default()).unwrap();
        let ranked = m.predict(&SparseVector::default());
        let mut by_bias: Vec<(String, f64)> = m.classes().iter().cloned().zip(m.bias().iter().copied()).collect();
        by_bias.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let names: Vec<&String> = ranked.iter().map(|(c, _)| c).collect();
        let expected: Vec<&String> = by_bias.iter().map(|(c, _)| c).collect();
        assert_eq!(names, expected);
        assert_eq!(ranked[0].0, "pos");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (xs, ys) = toy();
        let cfg = LinearConfig {
            epochs: 2,
            ..Default::default()
        };
        let mut m = linear_train(&xs, &ys, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for w in m.weights_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let refs: Vec<&SparseVector> = xs.iter().collect();
        let targets: Vec<usize> = ys.iter().map(|y| m.class_index(y).unwrap()).collect();
        let l2 = 0.01;
        let (_, grad) = m.loss_and_grad(&refs, &targets, l2);
        let h = 1e-5;
        for _ in 0..10 {
            let i = rng.gen_range(0..m.weights().len());
            let orig = m.weights()[i];
            m.weights_mut()[i] = orig + h;
            let (up, _) = m.loss_and_grad(&refs, &targets, l2);
            m.weights_mut()[i] = orig - h;
            let (down, _) = m.loss_and_grad(&refs, &targets, l2);
            m.weights_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad.weights[i] - numeric).abs() / grad.weights[i].abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "weight {i}: analytic {} numeric {numeric}", grad.weights[i]);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (xs, _) = toy();
        let ys = vec!["only".to_string(); xs.len()];
        assert!(matches!(
            linear_train(&xs, &ys, &LinearConfig::default()),
            Err(BaselineError::SingleClass(1))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = toy();
        let a = linear_train(&xs, &ys, &LinearConfig::default()).unwrap();
        let b = linear_train(&xs, &ys, &LinearConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
