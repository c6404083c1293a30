use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

/// Constants derived from `(d, lambda, gamma_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub d: usize,
    pub lambda: f64,
    /// Escape probability of the simple random walk.
    pub gamma_d: f64,
    /// Return probability `1 - gamma_d`.
    pub return_probability: f64,
    pub h_lambda: f64,
    /// Noise constant `(1 + 2 lambda d)(1 + 1 / h_lambda)`.
    pub c_lambda_d: f64,
    /// `1 / (2d(2 gamma_d - 1))`; `h_lambda > 0` iff `lambda` exceeds it.
    pub lambda_threshold: f64,
    pub supercritical: bool,
}

impl DerivedConstants {
    /// Limit of the second moment, `1 + 1 / h_lambda`.
    pub fn second_moment_limit(&self) -> f64 {
        1.0 + 1.0 / self.h_lambda
    }

    pub fn require_supercritical(&self) -> Result<()> {
        if self.supercritical {
            Ok(())
        } else {
            Err(Error::Subcritical { h_lambda: self.h_lambda, threshold: self.lambda_threshold })
        }
    }

    /// Per-excursion factor of the second-moment walk product,
    /// `(1 + 2 lambda d) / (4 lambda d) + 1 - gamma_d`.
    pub fn excursion_ratio(&self) -> f64 {
        let ld = self.lambda * self.d as f64;
        (1.0 + 2.0 * ld) / (4.0 * ld) + self.return_probability
    }
}

pub fn derive_constants(params: &ModelParams, gamma_d: f64) -> DerivedConstants {
    constants_for(params.d, params.lambda, gamma_d)
}

/// Same as [`derive_constants`] from the two parameters that matter.
pub fn constants_for(d: usize, lambda: f64, gamma_d: f64) -> DerivedConstants {
    let df = d as f64;
    let h_lambda = (2.0 * lambda * df * (2.0 * gamma_d - 1.0) - 1.0) / (1.0 + 2.0 * df * lambda);
    let lambda_threshold = 1.0 / (2.0 * df * (2.0 * gamma_d - 1.0));
    let c_lambda_d = (1.0 + 2.0 * lambda * df) * (1.0 + 1.0 / h_lambda);
    DerivedConstants {
        d,
        lambda,
        gamma_d,
        return_probability: 1.0 - gamma_d,
        h_lambda,
        c_lambda_d,
        lambda_threshold,
        supercritical: h_lambda > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values_for_d3_lambda2() {
        let c = constants_for(3, 2.0, 0.65946);
        assert!((c.h_lambda - 0.217_47).abs() < 1e-5, "{}", c.h_lambda);
        assert!((c.second_moment_limit() - 5.598).abs() < 1e-3);
        assert!((c.c_lambda_d - 72.78).abs() < 1e-2, "{}", c.c_lambda_d);
        assert!((c.lambda_threshold - 0.5226).abs() < 1e-4);
        assert!(c.supercritical);
    }

    #[test]
    fn threshold_zeroes_h() {
        let g = 0.65946;
        let thr = constants_for(3, 1.0, g).lambda_threshold;
        let c = constants_for(3, thr, g);
        assert!(c.h_lambda.abs() < 1e-15);
        assert!(!c.supercritical);
        assert!(c.require_supercritical().is_err());
    }

    proptest! {
        #[test]
        fn positive_h_iff_above_threshold(d in 3usize..20, gamma in 0.55f64..0.99, lambda in 0.01f64..50.0) {
            let c = constants_for(d, lambda, gamma);
            prop_assume!((lambda - c.lambda_threshold).abs() > 1e-9);
            prop_assert_eq!(c.h_lambda > 0.0, lambda > c.lambda_threshold);
        }
    }
}
