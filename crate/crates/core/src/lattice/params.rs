use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar model parameters.
///
/// `side` is the torus side `L` in lattice units; `horizon` the macroscopic
/// time `T`. Microscopic time is macroscopic time times `n^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d: usize,
    pub lambda: f64,
    #[serde(default)]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    pub n: usize,
    pub side: usize,
    pub horizon: f64,
}

impl ModelParams {
    /// Validates and returns the parameters, listing every violated constraint.
    pub fn new(
        d: usize,
        lambda: f64,
        lambda1: f64,
        lambda2: f64,
        n: usize,
        side: usize,
        horizon: f64,
    ) -> Result<Self> {
        let p = Self { d, lambda, lambda1, lambda2, n, side, horizon };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric parameters (`lambda1 = lambda2 = 0`).
    pub fn symmetric(d: usize, lambda: f64, n: usize, side: usize, horizon: f64) -> Result<Self> {
        Self::new(d, lambda, 0.0, 0.0, n, side, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.d < 1 {
            v.push("d must be >= 1".to_string());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            v.push(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.lambda1.is_finite() && self.lambda1 >= 0.0) {
            v.push(format!("lambda1 must be finite and >= 0, got {}", self.lambda1));
        }
        if !self.lambda2.is_finite() {
            v.push(format!("lambda2 must be finite, got {}", self.lambda2));
        }
        if self.n < 1 {
            v.push("N must be >= 1".to_string());
        }
        if self.side < 4 || self.side % 2 != 0 {
            v.push(format!("L must be even and >= 4, got {}", self.side));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            v.push(format!("T must be finite and > 0, got {}", self.horizon));
        }
        if self.n >= 1 && self.lambda < self.lambda1 / self.n as f64 {
            v.push(format!(
                "lambda ({}) must be >= lambda1 / N ({})",
                self.lambda,
                self.lambda1 / self.n as f64
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub fn n_sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// Side of the macroscopic torus, `L / N`.
    pub fn period(&self) -> f64 {
        self.side as f64 / self.n as f64
    }

    /// Growth rate between events, `1 - 2 lambda d + lambda2 / N^2`.
    pub fn growth_rate(&self) -> f64 {
        1.0 - 2.0 * self.lambda * self.d as f64 + self.lambda2 / (self.n_f64() * self.n_f64())
    }

    /// Rate of infection of `x` from `x + e_i`.
    pub fn rate_from_plus(&self) -> f64 {
        self.lambda - self.lambda1 / self.n_f64()
    }

    /// Rate of infection of `x` from `x - e_i`.
    pub fn rate_from_minus(&self) -> f64 {
        self.lambda + self.lambda1 / self.n_f64()
    }

    /// Per-site event rate `1 + 2 lambda d`; the asymmetry cancels.
    pub fn site_rate(&self) -> f64 {
        1.0 + self.d as f64 * (self.rate_from_plus() + self.rate_from_minus())
    }

    pub fn micro_time(&self, t_macro: f64) -> f64 {
        t_macro * self.n_f64() * self.n_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collects_every_violation() {
        let err = ModelParams::new(3, 0.01, 1.0, 0.0, 10, 5, -1.0).unwrap_err();
        match err {
            Error::InvalidParams(v) => assert_eq!(v.len(), 3, "{v:?}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn accepts_reference_parameters() {
        let p = ModelParams::new(3, 2.0, 0.5, 0.0, 10, 40, 0.3).unwrap();
        assert_eq!(p.n_sites(), 64_000);
        assert!((p.period() - 4.0).abs() < 1e-15);
        assert!((p.growth_rate() + 11.0).abs() < 1e-15);
    }
}
