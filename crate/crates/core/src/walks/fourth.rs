//! Monte Carlo estimators built on the walk `S` on `(Z^d)^4`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quad::{InitialMoments, PointType, TypedPoint4, Walker};
use crate::error::{Error, Result};
use crate::lattice::{constants_for, GreenFunction};
use crate::rng::replica_rng;
use crate::stats::{Moments, WalkEstimate};

const CHUNK: usize = 500;

/// Escape certificate: a good point whose pairwise differences have total
/// hitting probability below this is treated as never turning bad again.
pub const ESCAPE_THRESHOLD: f64 = 1e-4;

/// Exponent used for the `(1 + eps0)`-moment diagnostic.
pub const EPS0: f64 = 0.1;

fn check(d: usize, lambda: f64, t: f64) -> Result<()> {
    let mut errs = Vec::new();
    if d == 0 {
        errs.push("d must be positive".to_string());
    }
    if !(lambda > 0.0) {
        errs.push(format!("lambda must be positive, got {lambda}"));
    }
    if !(t >= 0.0) {
        errs.push(format!("time must be nonnegative, got {t}"));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(errs))
    }
}

fn poisson_steps<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean == 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    }
}

fn run_chunks<T: Send>(n: usize, seed: u64, f: impl Fn(&mut crate::rng::SimRng, usize) -> Vec<T> + Sync) -> Vec<T> {
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, c as u64);
            f(&mut rng, CHUNK.min(n - c * CHUNK))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Unbiased estimate of `F_t(x, x, x, x) = E[eta_t(x)^4]` at microscopic
/// time `t`: run `S` for `Poisson(8 lambda d t)` steps from `(x, x, x, x)`
/// and average `prod M G / (8 lambda d) * F_0(S_n)`. `max_sample` is the
/// heavy-tail diagnostic.
pub fn fourth_moment_poissonized(
    d: usize,
    lambda: f64,
    t: f64,
    f0: &InitialMoments,
    n_walks: usize,
    seed: u64,
) -> Result<WalkEstimate> {
    check(d, lambda, t)?;
    let start = TypedPoint4::diagonal(&vec![0; d]);
    let mean_steps = 8.0 * lambda * d as f64 * t;
    let samples = run_chunks(n_walks, seed, |rng, count| {
        (0..count)
            .map(|_| {
                let n = poisson_steps(mean_steps, rng);
                let mut w = Walker::new(&start);
                let mut log_w = 0.0;
                for _ in 0..n {
                    log_w += w.weighted_step(lambda, rng).raw.ln();
                }
                log_w.exp() * w.f0(f0)
            })
            .collect()
    });
    Ok(WalkEstimate::from_samples(&samples, 0, 0.0))
}

/// Running estimate of the infinite product at one step cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonPoint {
    pub horizon: u64,
    pub mean: f64,
    pub stderr: f64,
    /// Fraction of walks not yet certified escaped at this cap.
    pub open_fraction: f64,
}

/// Output of [`product_bound_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    pub estimate: WalkEstimate,
    /// Estimates with the walks cut at 1/100, 1/10 and all of the horizon.
    pub checkpoints: Vec<HorizonPoint>,
    /// Mean of the product raised to `1 + EPS0`.
    pub eps_moment: f64,
    /// Whether `6 Gamma_d < 1`, the regime where bad points are visited
    /// finitely often.
    pub large_parameter_regime: bool,
    /// Running mean still growing with the horizon, or not finite.
    pub divergence_alarm: bool,
    pub warnings: Vec<String>,
}

/// Estimate `E_x[prod_i H(S_i, S_{i+1})]` by running the `H`-weighted walk
/// until it is certified to stay on good points or hits `horizon` steps.
/// The bias bound is the mean over walks of the product at certification
/// times the certificate's hitting-probability sum.
pub fn product_bound_estimate(start: &TypedPoint4, lambda: f64, n_walks: usize, horizon: u64, seed: u64) -> Result<ProductBound> {
    let d = start.d();
    check(d, lambda, 0.0)?;
    let green = GreenFunction::new(d)?;
    let gamma = green.escape_probability();
    let constants = constants_for(d, lambda, gamma);
    let large_parameter_regime = 6.0 * (1.0 - gamma) < 1.0;
    let r_min = certificate_radius(&green);
    let cuts = [horizon / 100, horizon / 10, horizon];
    // per walk: product at each cut, certified-by-cut flags, bias term
    let walks: Vec<([f64; 3], [bool; 3], f64)> = run_chunks(n_walks, seed, |rng, count| {
        (0..count)
            .map(|_| {
                let mut w = Walker::new(start);
                let mut log_p = 0.0f64;
                let mut at_cut = [0.0; 3];
                let mut done = [false; 3];
                let mut bias = 0.0;
                let mut step = 0u64;
                let mut next_cut = 0;
                loop {
                    while next_cut < 3 && step >= cuts[next_cut] {
                        at_cut[next_cut] = log_p.exp();
                        next_cut += 1;
                    }
                    if next_cut == 3 {
                        break;
                    }
                    if w.kind() == PointType::V {
                        if let Some(risk) = escape_risk(&w, &green, r_min) {
                            let p = log_p.exp();
                            bias = p * risk;
                            for c in next_cut..3 {
                                at_cut[c] = p;
                                done[c] = true;
                            }
                            break;
                        }
                    }
                    log_p += w.weighted_step(lambda, rng).bounded.ln();
                    step += 1;
                }
                (at_cut, done, bias)
            })
            .collect()
    });
    let mut checkpoints = Vec::new();
    for (c, &h) in cuts.iter().enumerate() {
        let m: Moments = walks.iter().map(|w| w.0[c]).collect();
        let open = walks.iter().filter(|w| !w.1[c]).count() as f64 / walks.len().max(1) as f64;
        checkpoints.push(HorizonPoint { horizon: h, mean: m.mean, stderr: m.stderr(), open_fraction: open });
    }
    let finals: Vec<f64> = walks.iter().map(|w| w.0[2]).collect();
    let censored = walks.iter().filter(|w| !w.1[2]).count() as u64;
    let bias = walks.iter().map(|w| w.2).sum::<f64>() / walks.len().max(1) as f64;
    let eps_moment = finals.iter().map(|p| p.powf(1.0 + EPS0)).sum::<f64>() / finals.len().max(1) as f64;
    let estimate = WalkEstimate::from_samples(&finals, censored, bias);
    let (mid, last) = (&checkpoints[1], &checkpoints[2]);
    let growth = last.mean - mid.mean;
    let divergence_alarm = !last.mean.is_finite()
        || growth > (0.02 * mid.mean).max(3.0 * last.stderr)
        || (last.open_fraction > 0.5 && growth > 0.0);
    let mut warnings = Vec::new();
    if !large_parameter_regime {
        warnings.push(format!("6 Gamma_d = {:.4} >= 1: bad points may recur; outside the large-d regime", 6.0 * (1.0 - gamma)));
    }
    if !constants.supercritical {
        warnings.push(format!("lambda = {lambda} is below the second-moment threshold {:.4}", constants.lambda_threshold));
    }
    if divergence_alarm {
        warnings.push(format!("running mean grows with the horizon: {:.4e} at {} vs {:.4e} at {}", mid.mean, mid.horizon, last.mean, last.horizon));
    }
    Ok(ProductBound { estimate, checkpoints, eps_moment, large_parameter_regime, divergence_alarm, warnings })
}

/// Distance below which no certificate is attempted: where the far-field
/// form of `k` reaches the per-pair share of the threshold.
fn certificate_radius(green: &GreenFunction) -> f64 {
    let d = green.d() as f64;
    let target = ESCAPE_THRESHOLD / 6.0;
    let mut x = vec![0i64; green.d()];
    x[0] = 1;
    let unit = green.hitting_probability_asymptotic(&x);
    0.8 * (unit / target).powf(1.0 / (d - 2.0))
}

/// Total hitting probability of the six pairwise differences, if all of
/// them are far enough for a certificate to be possible and it holds.
fn escape_risk(w: &Walker, green: &GreenFunction, r_min: f64) -> Option<f64> {
    let gaps = w.gaps();
    let r2 = r_min * r_min;
    if gaps.iter().any(|g| (g.iter().map(|c| c * c).sum::<i64>() as f64) < r2) {
        return None;
    }
    let risk: f64 = gaps.iter().map(|g| green.hitting_probability_bound(g)).sum();
    (risk < ESCAPE_THRESHOLD).then_some(risk)
}

/// Output of [`covariance_walk`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    /// `Cov(eta_t(x)^2, eta_t(y)^2)`.
    pub covariance: WalkEstimate,
    /// Fraction of walks in which the pairs met within their steps.
    pub meeting_probability: f64,
    pub meeting_stderr: f64,
}

/// `Cov(eta_t(O)^2, eta_t(y)^2)` at microscopic time `t` through
/// `F_t - F~_t` at `(O, O, y, y)`: only walks whose pairs meet contribute.
pub fn covariance_walk(
    y: &[i64],
    lambda: f64,
    t: f64,
    f0: &InitialMoments,
    n_walks: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    let d = y.len();
    check(d, lambda, t)?;
    let o = vec![0i64; d];
    let start = TypedPoint4::new([o.clone(), o, y.to_vec(), y.to_vec()])?;
    let mean_steps = 8.0 * lambda * d as f64 * t;
    let samples: Vec<(f64, bool)> = run_chunks(n_walks, seed, |rng, count| {
        (0..count)
            .map(|_| {
                let n = poisson_steps(mean_steps, rng);
                let mut w = Walker::new(&start);
                let mut met = w.meets();
                let (mut log_w, mut log_split) = (0.0f64, 0.0f64);
                for _ in 0..n {
                    let s = w.weighted_step(lambda, rng);
                    log_w += s.raw.ln();
                    log_split += s.split.ln();
                    met |= w.meets();
                }
                if !met {
                    return (0.0, false);
                }
                (log_w.exp() * w.f0(f0) - log_split.exp() * w.f0_split(f0), true)
            })
            .collect()
    });
    let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let p: Moments = samples.iter().map(|s| f64::from(u8::from(s.1))).collect();
    Ok(CovarianceEstimate {
        covariance: WalkEstimate::from_samples(&values, 0, 0.0),
        meeting_probability: p.mean,
        meeting_stderr: p.stderr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::quad::fourth_moment_series;

    #[test]
    fn zero_time_gives_initial_fourth_moment() {
        let f0 = InitialMoments { moments: [1.0, 1.0, 2.0, 4.0, 8.0] };
        let e = fourth_moment_poissonized(3, 2.0, 0.0, &f0, 100, 1).unwrap();
        assert_eq!(e.mean, 8.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn small_time_matches_enumeration() {
        let f0 = InitialMoments { moments: [1.0, 1.0, 2.0, 4.0, 8.0] };
        let t = 0.004; // 8 lambda d t = 0.192
        let exact = fourth_moment_series(&TypedPoint4::diagonal(&[0, 0, 0]), 2.0, t, &f0, 3);
        let e = fourth_moment_poissonized(3, 2.0, t, &f0, 200_000, 2).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr, "{} +- {} vs {exact}", e.mean, e.stderr);
    }

    #[test]
    fn good_start_far_apart_gives_one() {
        let d = 5;
        let mut c = [vec![0i64; d], vec![0; d], vec![0; d], vec![0; d]];
        c[1][0] = 40;
        c[2][1] = 40;
        c[3][2] = 40;
        let start = TypedPoint4::new(c).unwrap();
        let est = product_bound_estimate(&start, 2.0, 200, 1000, 3).unwrap();
        assert_eq!(est.estimate.mean, 1.0);
        assert!(!est.divergence_alarm);
    }

    #[test]
    fn covariance_vanishes_for_distant_pairs() {
        let f0 = InitialMoments::constant_one();
        let far = covariance_walk(&[60, 0, 0], 2.0, 0.5, &f0, 2000, 4).unwrap();
        assert_eq!(far.meeting_probability, 0.0);
        assert_eq!(far.covariance.mean, 0.0);
    }
}
