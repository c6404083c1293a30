use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-site law of the initial occupation value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    ConstantOne,
    /// `low` or `high` with probability 1/2 each.
    TwoPoint { low: f64, high: f64 },
    /// Gamma law with the given shape and mean one.
    GammaMeanOne { shape: f64 },
}

impl Marginal {
    pub fn two_point() -> Self {
        Marginal::TwoPoint { low: 0.0, high: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::ConstantOne => Ok(()),
            Marginal::TwoPoint { low, high } => {
                if low < 0.0 || high < 0.0 || !low.is_finite() || !high.is_finite() {
                    Err(Error::NegativeSupport(format!("two-point law {{{low}, {high}}}")))
                } else {
                    Ok(())
                }
            }
            Marginal::GammaMeanOne { shape } => {
                if shape > 0.0 && shape.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NegativeSupport(format!("gamma shape {shape} must be positive")))
                }
            }
        }
    }

    /// `E[xi^k]`.
    pub fn moment(&self, k: u32) -> f64 {
        match *self {
            Marginal::ConstantOne => 1.0,
            Marginal::TwoPoint { low, high } => 0.5 * (low.powi(k as i32) + high.powi(k as i32)),
            Marginal::GammaMeanOne { shape } => {
                (0..k).map(|j| (shape + j as f64) / shape).product()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        self.moment(2) - self.mean().powi(2)
    }

    pub(crate) fn sampler(&self) -> MarginalSampler {
        match *self {
            Marginal::ConstantOne => MarginalSampler::Constant(1.0),
            Marginal::TwoPoint { low, high } => MarginalSampler::TwoPoint(low, high),
            Marginal::GammaMeanOne { shape } => {
                MarginalSampler::Gamma(Gamma::new(shape, 1.0 / shape).expect("validated shape"))
            }
        }
    }
}

pub(crate) enum MarginalSampler {
    Constant(f64),
    TwoPoint(f64, f64),
    Gamma(Gamma<f64>),
}

impl MarginalSampler {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalSampler::Constant(c) => *c,
            MarginalSampler::TwoPoint(lo, hi) => {
                if rng.random::<bool>() {
                    *hi
                } else {
                    *lo
                }
            }
            MarginalSampler::Gamma(g) => g.sample(rng),
        }
    }
}

/// Macroscopic density profile `rho_0(u)` on the torus `[0, period)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityShape {
    Flat { level: f64 },
    /// `level + amplitude * exp(-|u - center|^2 / (2 width^2))`, distance
    /// taken to the nearest periodic image.
    Bump { level: f64, amplitude: f64, center: Vec<f64>, width: f64 },
    /// `level + amplitude * cos(2 pi mode . u / period)`.
    Cosine { level: f64, amplitude: f64, mode: Vec<i64> },
}

impl DensityShape {
    pub fn value(&self, u: &[f64], period: f64) -> f64 {
        match self {
            DensityShape::Flat { level } => *level,
            DensityShape::Bump { level, amplitude, center, width } => {
                let r2: f64 = u
                    .iter()
                    .zip(center)
                    .map(|(a, c)| {
                        let mut dx = (a - c).rem_euclid(period);
                        if dx > 0.5 * period {
                            dx -= period;
                        }
                        dx * dx
                    })
                    .sum();
                level + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            DensityShape::Cosine { level, amplitude, mode } => {
                let phase: f64 = u.iter().zip(mode).map(|(a, k)| *k as f64 * a).sum::<f64>();
                level + amplitude * (2.0 * std::f64::consts::PI * phase / period).cos()
            }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::NegativeSupport(msg));
        match self {
            DensityShape::Flat { level } if *level < 0.0 => bad(format!("flat level {level}")),
            DensityShape::Bump { level, amplitude, center, width } => {
                if center.len() != d {
                    return Err(Error::InvalidParams(vec![format!(
                        "bump center has {} coordinates, expected {d}",
                        center.len()
                    )]));
                }
                if *level < 0.0 || level + amplitude.min(0.0) < 0.0 || *width <= 0.0 {
                    return bad(format!("bump level {level}, amplitude {amplitude}, width {width}"));
                }
                Ok(())
            }
            DensityShape::Cosine { level, amplitude, mode } => {
                if mode.len() != d {
                    return Err(Error::InvalidParams(vec![format!(
                        "cosine mode has {} components, expected {d}",
                        mode.len()
                    )]));
                }
                if level - amplitude.abs() < 0.0 {
                    return bad(format!("cosine level {level} below amplitude {amplitude}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Law of the initial configuration; sites are independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialLaw {
    /// i.i.d. sites with the given marginal.
    Iid { marginal: Marginal },
    /// `eta_0(x) = rho_0(x / N) * xi_x` with i.i.d. mean-one `xi_x`.
    Profile { shape: DensityShape, marginal: Marginal },
}

impl InitialLaw {
    pub fn constant_one() -> Self {
        InitialLaw::Iid { marginal: Marginal::ConstantOne }
    }

    pub fn iid(marginal: Marginal) -> Self {
        InitialLaw::Iid { marginal }
    }

    pub fn marginal(&self) -> &Marginal {
        match self {
            InitialLaw::Iid { marginal } | InitialLaw::Profile { marginal, .. } => marginal,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.marginal().validate()?;
        if let InitialLaw::Profile { shape, .. } = self {
            shape.validate(d)?;
        }
        Ok(())
    }

    /// Mean one at every site, as the fluctuation field assumes.
    pub fn is_mean_one_iid(&self) -> bool {
        matches!(self, InitialLaw::Iid { marginal } if (marginal.mean() - 1.0).abs() < 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn closed_form_moments() {
        assert_eq!(Marginal::ConstantOne.moment(4), 1.0);
        assert_eq!(Marginal::two_point().moment(4), 8.0);
        assert_eq!(Marginal::two_point().moment(2), 2.0);
        let k = 2.5;
        let g = Marginal::GammaMeanOne { shape: k };
        let expect = (k + 1.0) * (k + 2.0) * (k + 3.0) / (k * k * k);
        assert!((g.moment(4) - expect).abs() < 1e-12);
    }

    #[test]
    fn gamma_sampler_matches_fourth_moment() {
        let k = 3.0;
        let g = Marginal::GammaMeanOne { shape: k };
        let s = g.sampler();
        let mut rng = rng_from_seed(5);
        let n = 400_000;
        let (mut m1, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.sample(&mut rng);
            m1 += x;
            m4 += x.powi(4);
        }
        assert!((m1 / n as f64 - 1.0).abs() < 0.01);
        let rel = (m4 / n as f64) / g.moment(4) - 1.0;
        assert!(rel.abs() < 0.05, "{rel}");
    }

    #[test]
    fn rejects_negative_support() {
        assert!(Marginal::TwoPoint { low: -1.0, high: 3.0 }.validate().is_err());
        assert!(Marginal::GammaMeanOne { shape: 0.0 }.validate().is_err());
        let cos = DensityShape::Cosine { level: 0.5, amplitude: 1.0, mode: vec![1, 0, 0] };
        assert!(matches!(cos.validate(3), Err(Error::NegativeSupport(_))));
    }

    #[test]
    fn serde_roundtrip() {
        let law = InitialLaw::Profile {
            shape: DensityShape::Bump { level: 1.0, amplitude: 2.0, center: vec![1.0, 2.0], width: 0.3 },
            marginal: Marginal::GammaMeanOne { shape: 2.0 },
        };
        let s = serde_json::to_string(&law).unwrap();
        assert_eq!(serde_json::from_str::<InitialLaw>(&s).unwrap(), law);
    }
}
