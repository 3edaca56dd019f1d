use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::EncoderParameters;
use super::EncoderError;

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient of `loss` with central differences on up
/// to `per_tensor` random coordinates of every tensor. Coordinates the loss
/// actually depends on (nonzero analytic gradient) are preferred, so unused
/// embedding rows are not wasted on.
pub fn grad_check<F>(
    params: &EncoderParameters,
    loss: F,
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport, EncoderError>
where
    F: Fn(&EncoderParameters, Option<&mut [f64]>) -> Result<f64, EncoderError>,
{
    let mut grads = vec![0.0; params.len()];
    loss(params, Some(&mut grads))?;
    let mut probe = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for info in params.layout().tensors() {
        let live: Vec<usize> = info.range.clone().filter(|&i| grads[i] != 0.0).collect();
        let pool: Vec<usize> = if live.is_empty() { info.range.clone().collect() } else { live };
        let mut worst: f64 = 0.0;
        let take = per_tensor.min(pool.len());
        for _ in 0..take {
            let i = pool[rng.gen_range(0..pool.len())];
            let orig = probe.data[i];
            probe.data[i] = orig + epsilon;
            let up = loss(&probe, None)?;
            probe.data[i] = orig - epsilon;
            let down = loss(&probe, None)?;
            probe.data[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(grads[i], numeric));
        }
        tensors.push(TensorCheck {
            name: info.name.clone(),
            checked: take,
            max_rel_error: worst,
        });
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { tensors, max_rel_error })
}
