//! Monte Carlo estimate of the escape probability on the infinite lattice.

use rand::Rng;
use rayon::prelude::*;

use super::green::late_return_mass;
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::stats::WalkEstimate;

/// Walks per independently seeded chunk.
const CHUNK: usize = 1000;

/// Default censoring horizon in steps.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// Fraction of simple random walks from the origin of `Z^d` that do not
/// return within `horizon` steps.
///
/// Censored walks count as escaped, so the estimate is biased upward by at
/// most the probability of a first return after `horizon`; the local-CLT
/// estimate of that mass is reported as `bias_bound`.
pub fn estimate_gamma_d(d: usize, n_walks: usize, horizon: u64, seed: u64) -> Result<WalkEstimate> {
    if d < 3 {
        return Err(Error::RecurrentDimension { d });
    }
    let n_chunks = n_walks.div_ceil(CHUNK);
    let chunks: Vec<(Vec<f64>, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, c as u64);
            let count = CHUNK.min(n_walks - c * CHUNK);
            let mut out = Vec::with_capacity(count);
            let mut censored = 0;
            let mut pos = vec![0i64; d];
            for _ in 0..count {
                pos.iter_mut().for_each(|p| *p = 0);
                let mut nonzero = 0usize;
                let mut returned = false;
                for _ in 0..horizon {
                    let j = rng.random_range(0..2 * d);
                    let p = &mut pos[j / 2];
                    let was_zero = *p == 0;
                    *p += if j % 2 == 0 { 1 } else { -1 };
                    match (was_zero, *p == 0) {
                        (true, false) => nonzero += 1,
                        (false, true) => nonzero -= 1,
                        _ => {}
                    }
                    if nonzero == 0 {
                        returned = true;
                        break;
                    }
                }
                if !returned {
                    censored += 1;
                }
                out.push(if returned { 0.0 } else { 1.0 });
            }
            (out, censored)
        })
        .collect();
    let censored = chunks.iter().map(|c| c.1).sum();
    let samples: Vec<f64> = chunks.into_iter().flat_map(|c| c.0).collect();
    Ok(WalkEstimate::from_samples(&samples, censored, late_return_mass(d, horizon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_recurrent_dimensions() {
        assert!(matches!(estimate_gamma_d(1, 10, 10, 0), Err(Error::RecurrentDimension { d: 1 })));
        assert!(estimate_gamma_d(2, 10, 10, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = estimate_gamma_d(4, 2500, 200, 11).unwrap();
        let b = estimate_gamma_d(4, 2500, 200, 11).unwrap();
        assert_eq!(a, b);
    }
}
