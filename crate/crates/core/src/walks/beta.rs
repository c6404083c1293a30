//! The beta-walk product for the second moment.
//!
//! The walk on `Z^d` moves to a uniform neighbour, except at the origin
//! where the self-loop is a further option. Only steps from the origin
//! carry weight, so once the walk is far from the origin it can be sent
//! back with probability `k(x)` (or finished otherwise) without changing
//! the law of the product.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{constants_for, DerivedConstants, GreenFunction};
use crate::rng::replica_rng;
use crate::stats::WalkEstimate;

const CHUNK: usize = 1000;

/// Squared radius beyond which the walk is resolved through `k(x)`.
const SPLICE_RADIUS_SQ: i64 = 36;

/// Weights of the beta walk for given `(d, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaWeights {
    pub d: usize,
    pub lambda: f64,
}

impl BetaWeights {
    /// Weight of the origin self-loop, `(1 + 2 lambda d)(2d + 1) / (4 lambda d)`.
    pub fn origin_loop(&self) -> f64 {
        let ld = self.lambda * self.d as f64;
        (1.0 + 2.0 * ld) * (2 * self.d + 1) as f64 / (4.0 * ld)
    }

    /// Weight of a step from the origin to a neighbour, `(2d + 1) / (2d)`.
    pub fn origin_exit(&self) -> f64 {
        (2 * self.d + 1) as f64 / (2 * self.d) as f64
    }

    /// `H(x, y)`; one away from the origin.
    pub fn weight(&self, x: &[i64], y: &[i64]) -> f64 {
        let at_origin = x.iter().all(|&c| c == 0);
        match (at_origin, x == y) {
            (true, true) => self.origin_loop(),
            (true, false) => self.origin_exit(),
            _ => 1.0,
        }
    }
}

/// Output of [`beta_walk_product`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaWalkEstimate {
    /// The infinite product's expectation. Its variance is infinite when
    /// the squared excursion factor has mean above one, in which case the
    /// standard errors understate the spread.
    pub product: WalkEstimate,
    /// Product over one excursion from the origin, times the indicator of
    /// returning: its mean is `(1 + 2 lambda d) / (4 lambda d) + 1 - gamma_d`.
    pub excursion: WalkEstimate,
    /// `E[excursion^2]` from the exact law of one excursion; the product has
    /// finite variance iff this is below one.
    pub excursion_second_moment: f64,
    pub constants: DerivedConstants,
    pub warnings: Vec<String>,
}

/// Sample the beta-walk product from the origin. `horizon` caps the number
/// of steps per walk; walks still running are counted as censored.
pub fn beta_walk_product(d: usize, lambda: f64, n_walks: usize, horizon: u64, seed: u64) -> Result<BetaWalkEstimate> {
    let green = GreenFunction::new(d)?;
    let gamma = green.escape_probability();
    let constants = constants_for(d, lambda, gamma);
    let mut warnings = Vec::new();
    if !constants.supercritical {
        warnings.push(format!(
            "lambda = {lambda} is not above the threshold {:.6}; the product has infinite mean",
            constants.lambda_threshold
        ));
    }
    let w = BetaWeights { d, lambda };
    let n_chunks = n_walks.div_ceil(CHUNK);
    let chunks: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, c as u64);
            let count = CHUNK.min(n_walks - c * CHUNK);
            let mut products = Vec::with_capacity(count);
            let mut excursions = Vec::new();
            let mut censored = 0;
            for _ in 0..count {
                let (p, exc, done) = one_walk(&w, &green, horizon, &mut rng);
                products.push(p);
                excursions.extend(exc);
                if !done {
                    censored += 1;
                }
            }
            (products, excursions, censored)
        })
        .collect();
    let censored = chunks.iter().map(|c| c.2).sum();
    let mut products = Vec::with_capacity(n_walks);
    let mut excursions = Vec::new();
    for (p, e, _) in chunks {
        products.extend(p);
        excursions.extend(e);
    }
    let n = 2 * d + 1;
    let gamma_ret = 1.0 - gamma;
    let excursion_second_moment =
        w.origin_loop().powi(2) / n as f64 + (2 * d) as f64 / n as f64 * w.origin_exit().powi(2) * gamma_ret;
    if excursion_second_moment >= 1.0 {
        warnings.push(format!(
            "squared excursion factor has mean {excursion_second_moment:.4} >= 1: the product has infinite variance"
        ));
    }
    Ok(BetaWalkEstimate {
        warnings,
        product: WalkEstimate::from_samples(&products, censored, 0.0),
        excursion: WalkEstimate::from_samples(&excursions, 0, 0.0),
        excursion_second_moment,
        constants,
    })
}

/// One walk: the product, the per-excursion factors, and whether it ended
/// by escaping (rather than at the horizon).
fn one_walk<R: Rng + ?Sized>(w: &BetaWeights, green: &GreenFunction, horizon: u64, rng: &mut R) -> (f64, Vec<f64>, bool) {
    let d = w.d;
    let mut pos = vec![0i64; d];
    let mut product = 1.0;
    let mut excursions = Vec::new();
    let mut steps = 0;
    while steps < horizon {
        // at the origin
        steps += 1;
        let j = rng.random_range(0..2 * d + 1);
        if j == 2 * d {
            product *= w.origin_loop();
            excursions.push(w.origin_loop());
            continue;
        }
        product *= w.origin_exit();
        let excursion = w.origin_exit();
        pos.iter_mut().for_each(|c| *c = 0);
        pos[j / 2] = if j % 2 == 0 { 1 } else { -1 };
        // away from the origin: weights are one
        loop {
            if pos.iter().all(|&c| c == 0) {
                excursions.push(excursion);
                break;
            }
            if steps >= horizon {
                return (product, excursions, false);
            }
            if pos.iter().map(|c| c * c).sum::<i64>() >= SPLICE_RADIUS_SQ {
                if rng.random::<f64>() < green.hitting_probability(&pos) {
                    pos.iter_mut().for_each(|c| *c = 0);
                    continue;
                }
                excursions.push(0.0);
                return (product, excursions, true);
            }
            steps += 1;
            let j = rng.random_range(0..2 * d);
            pos[j / 2] += if j % 2 == 0 { 1 } else { -1 };
        }
    }
    (product, excursions, false)
}

/// `Sum_k r^k gamma_d`, the closed form of the product's expectation.
pub fn beta_product_closed_form(c: &DerivedConstants) -> f64 {
    let r = c.excursion_ratio();
    if r >= 1.0 {
        f64::INFINITY
    } else {
        c.gamma_d / (1.0 - r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_table() {
        let w = BetaWeights { d: 3, lambda: 2.0 };
        assert!((w.origin_loop() - 91.0 / 24.0).abs() < 1e-15);
        assert!((w.origin_exit() - 7.0 / 6.0).abs() < 1e-15);
        assert_eq!(w.weight(&[1, 0, 0], &[2, 0, 0]), 1.0);
        assert_eq!(w.weight(&[0, 0, 0], &[0, 0, 0]), w.origin_loop());
    }

    #[test]
    fn origin_loop_decreases_to_its_limit() {
        let mut last = f64::INFINITY;
        for lambda in [0.5, 1.0, 2.0, 10.0, 100.0, 1e6] {
            let v = BetaWeights { d: 3, lambda }.origin_loop();
            assert!(v < last);
            last = v;
        }
        assert!((last - 3.5).abs() < 1e-5);
    }

    #[test]
    fn geometric_series_closes_to_second_moment_limit() {
        let c = constants_for(3, 2.0, 0.659_462_670_449);
        assert!((beta_product_closed_form(&c) - c.second_moment_limit()).abs() < 1e-12);
    }

    #[test]
    fn excursion_factor_matches_closed_form() {
        let est = beta_walk_product(3, 2.0, 20_000, 1_000_000, 5).unwrap();
        let r = est.constants.excursion_ratio();
        let e = &est.excursion;
        assert!((e.mean - r).abs() < 4.0 * e.stderr, "{} vs {r} (se {})", e.mean, e.stderr);
        assert!(est.excursion_second_moment > 1.0);
        assert_eq!(est.product.censored_fraction, 0.0);
    }
}
