//! Length-fidelity metrics: per-generation errors, grouped aggregation,
//! relative improvement, and a paired sign-flip permutation test.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::float;

/// Pairs of sizes up to this many are tested by exhaustive sign-flip
/// enumeration (2^12 = 4096 assignments); larger inputs fall back to seeded
/// Monte Carlo sampling.
pub const MAX_EXACT_PAIRS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("target word count must be at least 1")]
    ZeroTarget,
    #[error("cannot aggregate an empty group")]
    EmptyGroup,
    #[error("baseline value must be positive")]
    ZeroBaseline,
    #[error("paired samples differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("paired test requires at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("pairing keys do not align")]
    UnpairedKey,
}

/// Per-generation length fidelity. `abs_error` is |generated - target|,
/// `apd` is the absolute percentage deviation abs_error / target, and
/// `ratio` is generated / target (1.0 = perfect adherence).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthMetrics {
    pub generated_words: u64,
    pub target_words: u64,
    pub abs_error: u64,
    pub apd: f64,
    pub ratio: f64,
}

pub fn length_metrics(
    generated_words: u64,
    target_words: u64,
) -> Result<LengthMetrics, MetricsError> {
    if target_words == 0 {
        return Err(MetricsError::ZeroTarget);
    }
    let abs_error = generated_words.abs_diff(target_words);
    let target = target_words as f64;
    Ok(LengthMetrics {
        generated_words,
        target_words,
        abs_error,
        apd: abs_error as f64 / target,
        ratio: generated_words as f64 / target,
    })
}

/// Standard-deviation convention for [`stats`] and [`aggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StdMode {
    /// Divide by n. Well-defined for single-value groups.
    #[default]
    Population,
    /// Divide by n - 1. Single-value groups report a std of 0.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and standard deviation of a non-empty slice.
pub fn stats(values: &[f64], mode: StdMode) -> Result<AggregateStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match mode {
        StdMode::Population => n as f64,
        StdMode::Sample if n > 1 => (n - 1) as f64,
        StdMode::Sample => return Ok(AggregateStats { mean, std: 0.0, n }),
    };
    Ok(AggregateStats {
        mean,
        std: float::sqrt(ss / denom),
        n,
    })
}

/// Group values by key and compute [`stats`] per group. Groups are non-empty
/// by construction.
pub fn aggregate<K, I>(pairs: I, mode: StdMode) -> BTreeMap<K, AggregateStats>
where
    K: Ord,
    I: IntoIterator<Item = (K, f64)>,
{
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (key, value) in pairs {
        groups.entry(key).or_default().push(value);
    }
    groups
        .into_iter()
        .map(|(key, values)| {
            let s = stats(&values, mode).expect("group is non-empty");
            (key, s)
        })
        .collect()
}

/// Percentage improvement of `candidate` over `baseline`:
/// 100 * (baseline - candidate) / baseline. Positive means better (lower).
pub fn relative_improvement(candidate: f64, baseline: f64) -> Result<f64, MetricsError> {
    if baseline <= 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

/// Outcome of a paired sign-flip permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// Mean paired difference a - b.
    pub statistic: f64,
    /// Two-sided p-value in [0, 1].
    pub p_value: f64,
    pub n_pairs: usize,
    /// Number of sign assignments examined (2^n_pairs when exact).
    pub n_resamples: u64,
    pub seed: u64,
    pub exact: bool,
}

/// Two-sided paired sign-flip permutation test on the differences a_i - b_i.
///
/// With `n_pairs <= MAX_EXACT_PAIRS` all 2^n sign assignments are
/// enumerated; otherwise `n_resamples` random assignments are drawn from a
/// ChaCha8 stream seeded with `seed`, and the p-value uses the standard
/// (1 + hits) / (1 + draws) estimator so it can never be exactly zero.
pub fn paired_significance(
    a: &[f64],
    b: &[f64],
    n_resamples: u32,
    seed: u64,
) -> Result<SignificanceResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(MetricsError::TooFewPairs(a.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let observed: f64 = diffs.iter().sum();
    let threshold = float::abs(observed);

    if n <= MAX_EXACT_PAIRS {
        let total = 1u64 << n;
        let mut hits = 0u64;
        for mask in 0..total {
            let mut sum = 0.0;
            for (i, d) in diffs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            if float::abs(sum) >= threshold {
                hits += 1;
            }
        }
        return Ok(SignificanceResult {
            statistic: observed / n as f64,
            p_value: hits as f64 / total as f64,
            n_pairs: n,
            n_resamples: total,
            seed,
            exact: true,
        });
    }

    use rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..n_resamples {
        let mut sum = 0.0;
        let mut bits = 0u64;
        let mut available = 0u32;
        for d in &diffs {
            if available == 0 {
                bits = rng.next_u64();
                available = 64;
            }
            if bits & 1 == 1 {
                sum -= d;
            } else {
                sum += d;
            }
            bits >>= 1;
            available -= 1;
        }
        if float::abs(sum) >= threshold {
            hits += 1;
        }
    }
    Ok(SignificanceResult {
        statistic: observed / n as f64,
        p_value: (1 + hits) as f64 / (1 + u64::from(n_resamples)) as f64,
        n_pairs: n,
        n_resamples: u64::from(n_resamples),
        seed,
        exact: false,
    })
}

/// Join two keyed samples into aligned vectors, erroring if either side has
/// a key the other lacks. Inputs may arrive in any order; pairs are aligned
/// by key order.
pub fn align_pairs<K: Ord + Clone>(
    a: &[(K, f64)],
    b: &[(K, f64)],
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let left: BTreeMap<&K, f64> = a.iter().map(|(k, v)| (k, *v)).collect();
    let right: BTreeMap<&K, f64> = b.iter().map(|(k, v)| (k, *v)).collect();
    if left.len() != right.len() {
        return Err(MetricsError::LengthMismatch {
            a: left.len(),
            b: right.len(),
        });
    }
    let mut xs = Vec::with_capacity(left.len());
    let mut ys = Vec::with_capacity(left.len());
    for (key, x) in &left {
        let y = right.get(key).ok_or(MetricsError::UnpairedKey)?;
        xs.push(*x);
        ys.push(*y);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apd_and_ratio() {
        let m = length_metrics(26, 20).unwrap();
        assert!((m.apd - 0.30).abs() < 1e-12);
        assert!((m.ratio - 1.30).abs() < 1e-12);
        assert_eq!(m.abs_error, 6);

        let exact = length_metrics(20, 20).unwrap();
        assert_eq!(exact.abs_error, 0);
        assert_eq!(exact.apd, 0.0);

        assert_eq!(length_metrics(5, 0), Err(MetricsError::ZeroTarget));
    }

    #[test]
    fn under_generation() {
        let m = length_metrics(99, 100).unwrap();
        assert!((m.apd - 0.01).abs() < 1e-12);
        assert!(m.ratio < 1.0);
    }

    #[test]
    fn improvement() {
        let pct = relative_improvement(0.088, 0.141).unwrap();
        assert!((pct - 37.6).abs() < 0.05);
        assert_eq!(relative_improvement(0.5, 0.5).unwrap(), 0.0);
        let haiku = relative_improvement(0.120, 0.130).unwrap();
        assert!((haiku - 7.69).abs() < 0.005);
        assert_eq!(
            relative_improvement(0.1, 0.0),
            Err(MetricsError::ZeroBaseline)
        );
    }

    #[test]
    fn stats_basics() {
        let s = stats(&[0.1, 0.2, 0.3], StdMode::Population).unwrap();
        assert!((s.mean - 0.2).abs() < 1e-12);
        let single = stats(&[0.5], StdMode::Population).unwrap();
        assert_eq!(single.mean, 0.5);
        assert_eq!(single.std, 0.0);
        let single_sample = stats(&[0.5], StdMode::Sample).unwrap();
        assert_eq!(single_sample.std, 0.0);
        assert_eq!(
            stats(&[], StdMode::Population),
            Err(MetricsError::EmptyGroup)
        );
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let r = paired_significance(&a, &a, 1000, 7).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 0.0);
        assert!(r.exact);
    }

    #[test]
    fn all_ones_vs_zeros() {
        let a = [0.0; 10];
        let b = [1.0; 10];
        let r = paired_significance(&a, &b, 1000, 7).unwrap();
        assert_eq!(r.p_value, 2.0 / 1024.0);
        assert_eq!(r.n_resamples, 1024);
    }

    #[test]
    fn zero_statistic_three_pairs() {
        let r = paired_significance(&[0.1, 0.0, 0.05], &[0.0, 0.1, 0.05], 1000, 7).unwrap();
        // diffs are {0.1, -0.1, 0}; every assignment ties or beats |sum| = 0.
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64 * 0.01 + 0.1).collect();
        let r1 = paired_significance(&a, &b, 500, 42).unwrap();
        let r2 = paired_significance(&a, &b, 500, 42).unwrap();
        assert!(!r1.exact);
        assert_eq!(r1.p_value, r2.p_value);
        assert!(r1.p_value > 0.0);
    }

    #[test]
    fn align_by_key() {
        let a = [((2u32, 0u32), 0.5), ((1, 0), 0.1)];
        let b = [((1u32, 0u32), 0.2), ((2, 0), 0.6)];
        let (xs, ys) = align_pairs(&a, &b).unwrap();
        assert_eq!(xs, vec![0.1, 0.5]);
        assert_eq!(ys, vec![0.2, 0.6]);

        let short = [((1u32, 0u32), 0.2)];
        assert!(align_pairs(&a, &short).is_err());
    }
}
