//! Monte Carlo bookkeeping: streaming moments, batch-means errors, pooling.

use serde::{Deserialize, Serialize};

/// Streaming mean/variance (Welford), mergeable across replicas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.n as f64 / nf;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / nf;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Monte Carlo estimate of a walk functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub mean: f64,
    /// Sample std over `sqrt(n)`; see `batch_stderr` for the batched value.
    pub stderr: f64,
    pub n_samples: u64,
    /// Standard error from 100 batch means (equals `stderr` for i.i.d. samples
    /// up to noise, more robust under heavy tails).
    pub batch_stderr: f64,
    /// Mean after discarding the top and bottom 0.1% of samples.
    pub trimmed_mean: f64,
    /// Largest single sample.
    pub max_sample: f64,
    /// Fraction of samples censored at the horizon while still in a
    /// weighted region (bad points, or away from an escape certificate).
    pub censored_fraction: f64,
    /// Upper bound on the bias caused by truncation, when known.
    pub bias_bound: f64,
}

impl WalkEstimate {
    /// Summarise i.i.d. samples; `censored` counts truncated ones.
    pub fn from_samples(samples: &[f64], censored: u64, bias_bound: f64) -> Self {
        let m: Moments = samples.iter().copied().collect();
        let n = samples.len();
        Self {
            mean: m.mean,
            stderr: m.stderr(),
            n_samples: n as u64,
            batch_stderr: batch_stderr(samples, 100),
            trimmed_mean: trimmed_mean(samples, 0.001),
            max_sample: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            censored_fraction: if n == 0 { 0.0 } else { censored as f64 / n as f64 },
            bias_bound,
        }
    }

    /// Is `value` within `k` standard errors plus the bias bound?
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + self.bias_bound
    }
}

/// Standard error of the mean computed from `n_batches` contiguous batch means.
pub fn batch_stderr(samples: &[f64], n_batches: usize) -> f64 {
    let n = samples.len();
    if n < 2 * n_batches || n_batches < 2 {
        let m: Moments = samples.iter().copied().collect();
        return m.stderr();
    }
    let size = n / n_batches;
    let means: Moments = samples
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    means.stderr()
}

/// Mean after dropping a `fraction` of samples from each tail.
pub fn trimmed_mean(samples: &[f64], fraction: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let k = (sorted.len() as f64 * fraction).floor() as usize;
    let kept = &sorted[k..sorted.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Count-weighted pooling of independent estimates `(mean, stderr, n)`.
pub fn pool(estimates: &[(f64, f64, u64)]) -> (f64, f64, u64) {
    let total: u64 = estimates.iter().map(|e| e.2).sum();
    if total == 0 {
        return (f64::NAN, f64::INFINITY, 0);
    }
    let tf = total as f64;
    let mean = estimates.iter().map(|e| e.0 * e.2 as f64).sum::<f64>() / tf;
    let var = estimates
        .iter()
        .map(|e| (e.2 as f64 * e.1).powi(2))
        .sum::<f64>()
        / (tf * tf);
    (mean, var.sqrt(), total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean - mean).abs() < 1e-14);
        assert!((m.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn trimmed_mean_drops_outliers() {
        let mut xs = vec![1.0; 1998];
        xs.push(1e9);
        xs.push(-1e9);
        assert_eq!(trimmed_mean(&xs, 0.001), 1.0);
    }

    #[test]
    fn pooling_identical_reports_shrinks_stderr() {
        let one = (2.0, 0.4, 100);
        let (m, se, n) = pool(&[one; 4]);
        assert_eq!(n, 400);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((se - 0.2).abs() < 1e-12);
        assert_eq!(pool(&[one]), (2.0, 0.4, 100));
    }

    proptest! {
        #[test]
        fn merge_is_concatenation(a in prop::collection::vec(-1e3f64..1e3, 0..40),
                                  b in prop::collection::vec(-1e3f64..1e3, 0..40)) {
            let mut left: Moments = a.iter().copied().collect();
            let right: Moments = b.iter().copied().collect();
            left.merge(&right);
            let all: Moments = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(left.n, all.n);
            prop_assert!((left.mean - all.mean).abs() < 1e-9);
            prop_assert!((left.variance() - all.variance()).abs() < 1e-6 * (1.0 + all.variance()));
        }
    }
}
