//! Evaluation metrics: top-N accuracy, the frequency baseline, mean
//! reciprocal rank, bootstrap variance and Welch's t-test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::baselines::frequency_order;
use crate::retrieval::RankedResult;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("n must be at least 1")]
    BadN,
    #[error("{rankings} rankings but {truths} truths")]
    LengthMismatch { rankings: usize, truths: usize },
    #[error("no samples")]
    Empty,
    #[error("ground truth {0:?} is missing from its ranking")]
    TruthAbsent(String),
    #[error("rank must be at least 1")]
    BadRank,
    #[error("bootstrap needs at least {MIN_RESAMPLES} resamples, got {0}")]
    TooFewResamples(usize),
    #[error("t-test needs at least 2 samples per group, got {0} and {1}")]
    SampleTooSmall(usize, usize),
    #[error("both samples have zero variance")]
    ZeroVariance,
}

fn check_lengths(rankings: usize, truths: usize) -> Result<(), EvalError> {
    if rankings != truths {
        return Err(EvalError::LengthMismatch { rankings, truths });
    }
    if rankings == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// 1 where the truth is among the first `n` entries, else 0.
pub fn top_n_hits<S: AsRef<str>>(rankings: &[Vec<S>], truths: &[S], n: usize) -> Result<Vec<f64>, EvalError> {
    if n < 1 {
        return Err(EvalError::BadN);
    }
    check_lengths(rankings.len(), truths.len())?;
    Ok(rankings
        .iter()
        .zip(truths)
        .map(|(r, t)| {
            let hit = r.iter().take(n).any(|c| c.as_ref() == t.as_ref());
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

pub fn top_n_accuracy<S: AsRef<str>>(rankings: &[Vec<S>], truths: &[S], n: usize) -> Result<f64, EvalError> {
    Ok(mean(&top_n_hits(rankings, truths, n)?))
}

/// The `n` most frequent training commands, ties in lexicographic order.
pub fn frequency_baseline(train_commands: &[String], n: usize) -> Result<Vec<String>, EvalError> {
    if train_commands.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut order = frequency_order(train_commands);
    order.truncate(n);
    Ok(order)
}

pub fn mrr(ranks: &[usize]) -> Result<f64, EvalError> {
    Ok(mean(&reciprocal_ranks(ranks)?))
}

pub fn reciprocal_ranks(ranks: &[usize]) -> Result<Vec<f64>, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::Empty);
    }
    ranks
        .iter()
        .map(|&r| if r == 0 { Err(EvalError::BadRank) } else { Ok(1.0 / r as f64) })
        .collect()
}

/// 1-based rank of each truth in its ranking.
pub fn truth_ranks(results: &[RankedResult], truths: &[String]) -> Result<Vec<usize>, EvalError> {
    check_lengths(results.len(), truths.len())?;
    results
        .iter()
        .zip(truths)
        .map(|(r, t)| r.rank_of(t).ok_or_else(|| EvalError::TruthAbsent(t.clone())))
        .collect()
}

pub fn mrr_of_results(results: &[RankedResult], truths: &[String]) -> Result<f64, EvalError> {
    mrr(&truth_ranks(results, truths)?)
}

/// `H_n / n`, the expected reciprocal rank of one item under a uniformly
/// random ordering of `n` items.
pub fn expected_random_mrr(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub estimate: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bootstrap_mean: f64,
    pub n: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// The metric recomputed on `b` resamples drawn with replacement.
pub fn bootstrap_distribution<T, F>(metric: F, samples: &[T], b: usize, seed: u64) -> Result<Vec<f64>, EvalError>
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    if b < MIN_RESAMPLES {
        return Err(EvalError::TooFewResamples(b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut buf = Vec::with_capacity(n);
    Ok((0..b)
        .map(|_| {
            buf.clear();
            buf.extend((0..n).map(|_| samples[rng.gen_range(0..n)].clone()));
            metric(&buf)
        })
        .collect())
}

/// Point estimate on the full sample, bootstrap variance and a percentile
/// 95% interval (widened if needed so it contains the estimate).
pub fn bootstrap<T, F>(
    name: &str,
    metric: F,
    samples: &[T],
    b: usize,
    seed: u64,
) -> Result<EvalReport, EvalError>
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    let mut dist = bootstrap_distribution(&metric, samples, b, seed)?;
    let estimate = metric(samples);
    let bm = mean(&dist);
    let variance = dist.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (dist.len() - 1) as f64;
    dist.sort_by(f64::total_cmp);
    Ok(EvalReport {
        metric: name.to_owned(),
        estimate,
        variance,
        ci_low: quantile(&dist, 0.025).min(estimate),
        ci_high: quantile(&dist, 0.975).max(estimate),
        bootstrap_mean: bm,
        n: samples.len(),
        resamples: b,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<WelchResult, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::SampleTooSmall(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    if va == 0.0 && vb == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(WelchResult {
        t,
        dof,
        p_value,
        significant: p_value < alpha,
    })
}

/// One row of an accuracy-versus-N curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub accuracy: f64,
    pub variant: String,
}

/// Accuracy at every N in `1..=max_n` for one system.
pub fn top_n_curve<S: AsRef<str>>(
    variant: &str,
    rankings: &[Vec<S>],
    truths: &[S],
    max_n: usize,
) -> Result<Vec<CurvePoint>, EvalError> {
    (1..=max_n)
        .map(|n| {
            Ok(CurvePoint {
                n,
                accuracy: top_n_accuracy(rankings, truths, n)?,
                variant: variant.to_owned(),
            })
        })
        .collect()
}

pub const CURVE_HEADER: &str = "n,accuracy,variant";

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.n, p.accuracy, p.variant));
    }
    out
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable record") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn top_n_hand_count() {
        let commands: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        // Truths at ranks 1, 3, 9.
        let truths = s(&["c0", "c2", "c8"]);
        let rankings = vec![commands.clone(), commands.clone(), commands.clone()];
        assert!((top_n_accuracy(&rankings, &truths, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(top_n_accuracy(&rankings, &truths, 10).unwrap(), 1.0);
        assert_eq!(top_n_accuracy(&rankings, &truths, 0), Err(EvalError::BadN));
    }

    #[test]
    fn truth_first_is_perfect_everywhere() {
        let rankings = vec![s(&["a", "b"]), s(&["b", "a"])];
        let truths = s(&["a", "b"]);
        for n in 1..=4 {
            assert_eq!(top_n_accuracy(&rankings, &truths, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn frequency_baseline_tie_rule() {
        let train = s(&["c", "b", "a", "b", "a", "a", "b"]);
        assert_eq!(frequency_baseline(&train, 2).unwrap(), ["a", "b"]);
        assert_eq!(frequency_baseline(&train, 1).unwrap(), ["a"]);
        assert_eq!(frequency_baseline(&train, 9).unwrap(), ["a", "b", "c"]);
        assert_eq!(frequency_baseline(&[], 1), Err(EvalError::Empty));
    }

    #[test]
    fn mrr_hand_values() {
        assert_eq!(mrr(&[1, 2, 4]).unwrap(), 7.0 / 12.0);
        assert_eq!(mrr(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(mrr(&[0]), Err(EvalError::BadRank));
    }

    #[test]
    fn mrr_reading_as_mean_rank() {
        // An MRR of 0.51 reads as an average rank of about 1.96.
        assert!((1.0f64 / 0.51 - 1.96).abs() < 0.01);
    }

    #[test]
    fn missing_truth_is_an_error() {
        let r = RankedResult {
            entries: vec![],
            ties: 0,
        };
        assert!(matches!(
            mrr_of_results(&[r], &s(&["x"])),
            Err(EvalError::TruthAbsent(_))
        ));
    }

    #[test]
    fn harmonic_expectation() {
        assert_eq!(expected_random_mrr(1), 1.0);
        assert!((expected_random_mrr(4) - (1.0 + 0.5 + 1.0 / 3.0 + 0.25) / 4.0).abs() < 1e-15);
        assert!((expected_random_mrr(1000) - 0.007_485_470_860_550_345).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_has_zero_variance() {
        let r = bootstrap("c", |_: &[f64]| 0.25, &[1.0, 2.0, 3.0], 200, 1).unwrap();
        assert_eq!(r.variance, 0.0);
        assert_eq!((r.ci_low, r.ci_high), (0.25, 0.25));
    }

    #[test]
    fn bootstrap_std_of_accuracy() {
        let samples: Vec<f64> = (0..2000).map(|i| if i < 960 { 1.0 } else { 0.0 }).collect();
        let r = bootstrap("acc", mean, &samples, 1000, 7).unwrap();
        let expected = (0.48f64 * 0.52 / 2000.0).sqrt();
        assert!((r.std_error() - expected).abs() < 0.2 * expected, "{}", r.std_error());
        assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
    }

    #[test]
    fn bootstrap_is_seeded_and_checks_b() {
        let xs = [0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(bootstrap("m", mean, &xs, 100, 3).unwrap(), bootstrap("m", mean, &xs, 100, 3).unwrap());
        assert_eq!(bootstrap("m", mean, &xs, 99, 3), Err(EvalError::TooFewResamples(99)));
    }

    #[test]
    fn welch_matches_reference() {
        // Reference values from scipy.stats.ttest_ind(equal_var=False).
        let a = [2.1, 2.5, 1.9, 2.8, 2.2, 2.4];
        let b = [3.0, 3.4, 2.9, 3.9, 3.1];
        let r = welch_t_test(&a, &b, 0.001).unwrap();
        assert!((r.t - -4.238_065_839_890_042).abs() < 1e-10);
        assert!((r.dof - 7.596_887_759_273_79).abs() < 1e-9);
        assert!((r.p_value - 0.003_198_299_581_128_643_4).abs() < 1e-8);
        assert!(!r.significant);
        assert!(welch_t_test(&a, &b, 0.01).unwrap().significant);
    }

    #[test]
    fn welch_identical_and_swapped() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&a, &a, 0.001).unwrap();
        assert_eq!(r.t, 0.0);
        assert!(!r.significant);
        let b = [2.0, 2.5, 4.0, 6.0];
        let ab = welch_t_test(&a, &b, 0.05).unwrap();
        let ba = welch_t_test(&b, &a, 0.05).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.significant, ba.significant);
        assert_eq!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0], 0.05), Err(EvalError::ZeroVariance));
        assert_eq!(welch_t_test(&[1.0], &a, 0.05), Err(EvalError::SampleTooSmall(1, 4)));
    }

    #[test]
    fn curve_csv_shape() {
        let rankings = vec![s(&["a", "b", "c"]), s(&["c", "a", "b"])];
        let truths = s(&["b", "b"]);
        let curve = top_n_curve("knn", &rankings, &truths, 3).unwrap();
        let csv = curve_csv(&curve);
        assert_eq!(csv, "n,accuracy,variant\n1,0,knn\n2,0.5,knn\n3,1,knn\n");
    }

    #[test]
    fn reports_serialize_one_per_line() {
        let r = bootstrap("m", mean, &[0.0, 1.0], 100, 0).unwrap();
        let text = to_jsonl(&[r.clone(), r]);
        assert_eq!(text.lines().count(), 2);
        let back: EvalReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back.metric, "m");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn accuracy_monotone_in_n(ranks in prop::collection::vec(0usize..8, 1..40)) {
                let cmds: Vec<String> = (0..8).map(|i| format!("c{i}")).collect();
                let truths: Vec<String> = ranks.iter().map(|&r| cmds[r].clone()).collect();
                let rankings = vec![cmds.clone(); ranks.len()];
                let curve: Vec<f64> = (1..=8).map(|n| top_n_accuracy(&rankings, &truths, n).unwrap()).collect();
                prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(curve[7], 1.0);
            }

            #[test]
            fn mrr_in_unit_interval(ranks in prop::collection::vec(1usize..50, 1..30)) {
                let m = mrr(&ranks).unwrap();
                prop_assert!(m > 0.0 && m <= 1.0);
                prop_assert_eq!(m == 1.0, ranks.iter().all(|&r| r == 1));
            }

            #[test]
            fn ci_contains_estimate(xs in prop::collection::vec(0.0f64..1.0, 1..30), seed in 0u64..50) {
                let r = bootstrap("m", mean, &xs, 100, seed).unwrap();
                prop_assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
                prop_assert!(r.variance >= 0.0);
            }
        }
    }
}
