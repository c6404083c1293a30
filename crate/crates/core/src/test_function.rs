//! Smooth periodic test functions on the macroscopic torus `[0, P)^d`.
//!
//! Fourier convention: `H(u) = sum_k c_k exp(2 pi i k.u / P)` with
//! `c_k = P^{-d} int H(u) exp(-2 pi i k.u / P) du`, so that
//! `||H||_2^2 = P^d sum_k |c_k|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A test function `H`. `Hermite` is the periodization of
/// `amplitude * prod_i He_{n_i}(s_i) exp(-s_i^2 / 2)`, `s_i = (u_i - c_i) / width`;
/// all orders zero give a Gaussian bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    Constant { value: f64, period: f64, d: usize },
    /// `amplitude * cos(2 pi mode.u / P)`
    Cosine { amplitude: f64, mode: Vec<i64>, period: f64 },
    Hermite { amplitude: f64, center: Vec<f64>, width: f64, orders: Vec<u32>, period: f64 },
}

/// Probabilists' Hermite polynomial `He_n(s)`.
fn hermite_poly(n: u32, s: f64) -> f64 {
    let (mut a, mut b) = (1.0, s);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = s * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Number of periodic images kept on each side.
fn images(width: f64, period: f64) -> i64 {
    (10.0 * width / period).ceil() as i64 + 1
}

/// `sum_m He_n(s_m) exp(-s_m^2 / 2)` with `s_m = (u - c - m P) / w`.
fn periodized(n: u32, u: f64, c: f64, w: f64, p: f64) -> f64 {
    let base = (u - c).rem_euclid(p);
    let k = images(w, p);
    (-k..=k)
        .map(|m| {
            let s = (base - m as f64 * p) / w;
            hermite_poly(n, s) * (-0.5 * s * s).exp()
        })
        .sum()
}

/// One-dimensional Fourier coefficient of the periodized Hermite function.
fn coefficient_1d(n: u32, k: i64, c: f64, w: f64, p: f64) -> Complex64 {
    let xi = 2.0 * PI * k as f64 * w / p;
    let ft = Complex64::new(0.0, -xi).powu(n) * (2.0 * PI).sqrt() * (-0.5 * xi * xi).exp();
    let shift = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * c / p);
    ft * shift * (w / p)
}

/// `sum_k |c_k|^2` in one dimension, summed until the Gaussian factor dies.
fn parseval_1d(n: u32, w: f64, p: f64) -> f64 {
    let mut total = coefficient_1d(n, 0, 0.0, w, p).norm_sqr();
    for k in 1.. {
        let term = coefficient_1d(n, k, 0.0, w, p).norm_sqr();
        total += 2.0 * term;
        let xi = 2.0 * PI * k as f64 * w / p;
        if xi > 1.0 + (n as f64).sqrt() && term < 1e-20 * total {
            break;
        }
    }
    total
}

impl TestFunction {
    /// Gaussian bump of standard deviation `width` centred at `center`.
    pub fn gaussian(center: Vec<f64>, width: f64, period: f64) -> Self {
        let d = center.len();
        TestFunction::Hermite { amplitude: 1.0, center, width, orders: vec![0; d], period }
    }

    pub fn cosine(mode: Vec<i64>, period: f64) -> Self {
        TestFunction::Cosine { amplitude: 1.0, mode, period }
    }

    pub fn d(&self) -> usize {
        match self {
            TestFunction::Constant { d, .. } => *d,
            TestFunction::Cosine { mode, .. } => mode.len(),
            TestFunction::Hermite { center, .. } => center.len(),
        }
    }

    pub fn period(&self) -> f64 {
        match self {
            TestFunction::Constant { period, .. }
            | TestFunction::Cosine { period, .. }
            | TestFunction::Hermite { period, .. } => *period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.period() > 0.0) {
            errs.push(format!("period must be positive, got {}", self.period()));
        }
        if let TestFunction::Hermite { center, width, orders, .. } = self {
            if !(*width > 0.0) {
                errs.push(format!("width must be positive, got {width}"));
            }
            if orders.len() != center.len() {
                errs.push(format!("{} orders for {} coordinates", orders.len(), center.len()));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// Same function with a different period, keeping shape parameters.
    pub fn with_period(&self, p: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Constant { period, .. }
            | TestFunction::Cosine { period, .. }
            | TestFunction::Hermite { period, .. } => *period = p,
        }
        out
    }

    fn phase(mode: &[i64], u: &[f64], p: f64) -> f64 {
        2.0 * PI * mode.iter().zip(u).map(|(k, x)| *k as f64 * x).sum::<f64>() / p
    }

    /// Per-axis factors `(value, first, second derivative)` of a Hermite
    /// product.
    fn hermite_factors(u: &[f64], center: &[f64], w: f64, orders: &[u32], p: f64) -> Vec<(f64, f64, f64)> {
        (0..u.len())
            .map(|i| {
                let n = orders[i];
                let f = periodized(n, u[i], center[i], w, p);
                let f1 = -periodized(n + 1, u[i], center[i], w, p) / w;
                let f2 = periodized(n + 2, u[i], center[i], w, p) / (w * w);
                (f, f1, f2)
            })
            .collect()
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value, .. } => *value,
            TestFunction::Cosine { amplitude, mode, period } => amplitude * Self::phase(mode, u, *period).cos(),
            TestFunction::Hermite { amplitude, center, width, orders, period } => {
                amplitude
                    * (0..u.len())
                        .map(|i| periodized(orders[i], u[i], center[i], *width, *period))
                        .product::<f64>()
            }
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        match self {
            TestFunction::Constant { .. } => vec![0.0; u.len()],
            TestFunction::Cosine { amplitude, mode, period } => {
                let s = -amplitude * Self::phase(mode, u, *period).sin();
                mode.iter().map(|k| s * 2.0 * PI * *k as f64 / period).collect()
            }
            TestFunction::Hermite { amplitude, center, width, orders, period } => {
                let f = Self::hermite_factors(u, center, *width, orders, *period);
                (0..u.len())
                    .map(|i| amplitude * f.iter().enumerate().map(|(j, v)| if j == i { v.1 } else { v.0 }).product::<f64>())
                    .collect()
            }
        }
    }

    pub fn laplacian(&self, u: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Cosine { mode, period, .. } => {
                let w2: f64 = mode.iter().map(|k| (2.0 * PI * *k as f64 / period).powi(2)).sum();
                -w2 * self.value(u)
            }
            TestFunction::Hermite { amplitude, center, width, orders, period } => {
                let f = Self::hermite_factors(u, center, *width, orders, *period);
                (0..u.len())
                    .map(|i| amplitude * f.iter().enumerate().map(|(j, v)| if j == i { v.2 } else { v.0 }).product::<f64>())
                    .sum()
            }
        }
    }

    /// `N^2 sum_i [H(u + e_i/N) + H(u - e_i/N) - 2 H(u)]`.
    pub fn discrete_laplacian(&self, u: &[f64], n: f64) -> f64 {
        let h0 = self.value(u);
        let mut v = u.to_vec();
        let mut total = 0.0;
        for i in 0..u.len() {
            v[i] = u[i] + 1.0 / n;
            total += self.value(&v);
            v[i] = u[i] - 1.0 / n;
            total += self.value(&v);
            v[i] = u[i];
            total -= 2.0 * h0;
        }
        n * n * total
    }

    pub fn fourier_coefficient(&self, k: &[i64]) -> Complex64 {
        match self {
            TestFunction::Constant { value, .. } => {
                if k.iter().all(|&x| x == 0) {
                    Complex64::new(*value, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            TestFunction::Cosine { amplitude, mode, .. } => {
                let plus = k == mode.as_slice();
                let minus = k.iter().zip(mode).all(|(a, b)| *a == -b);
                let half = 0.5 * amplitude;
                Complex64::new(half * (f64::from(u8::from(plus)) + f64::from(u8::from(minus))), 0.0)
            }
            TestFunction::Hermite { amplitude, center, width, orders, period } => {
                let mut c = Complex64::new(*amplitude, 0.0);
                for i in 0..k.len() {
                    c *= coefficient_1d(orders[i], k[i], center[i], *width, *period);
                }
                c
            }
        }
    }

    /// `||H||_2` over one period cell.
    pub fn l2_norm(&self) -> f64 {
        let p = self.period();
        let vol = p.powi(self.d() as i32);
        match self {
            TestFunction::Constant { value, .. } => value.abs() * vol.sqrt(),
            TestFunction::Cosine { amplitude, mode, .. } => {
                let factor = if mode.iter().all(|&k| k == 0) { 1.0 } else { 0.5 };
                amplitude.abs() * (factor * vol).sqrt()
            }
            TestFunction::Hermite { amplitude, width, orders, .. } => {
                let s: f64 = orders.iter().map(|&n| parseval_1d(n, *width, p)).product();
                amplitude.abs() * (vol * s).sqrt()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump3() -> TestFunction {
        TestFunction::Hermite { amplitude: 1.3, center: vec![1.0, 2.0, 0.5], width: 0.4, orders: vec![0, 1, 2], period: 4.0 }
    }

    #[test]
    fn hermite_polynomials() {
        assert_eq!(hermite_poly(0, 0.7), 1.0);
        assert_eq!(hermite_poly(1, 0.7), 0.7);
        assert!((hermite_poly(3, 0.7) - (0.343 - 2.1)).abs() < 1e-14);
    }

    #[test]
    fn gradient_and_laplacian_match_finite_differences() {
        let h = bump3();
        let u = [1.2, 1.7, 0.1];
        let e = 1e-4;
        let g = h.gradient(&u);
        let mut lap = 0.0;
        for i in 0..3 {
            let mut a = u;
            let mut b = u;
            a[i] += e;
            b[i] -= e;
            let fd = (h.value(&a) - h.value(&b)) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "axis {i}: {fd} vs {}", g[i]);
            lap += (h.value(&a) + h.value(&b) - 2.0 * h.value(&u)) / (e * e);
        }
        assert!((lap - h.laplacian(&u)).abs() < 1e-4 * (1.0 + lap.abs()));
    }

    #[test]
    fn discrete_laplacian_error_is_second_order() {
        let h = bump3();
        let u = [0.9, 2.3, 0.6];
        let err = |n: f64| (h.discrete_laplacian(&u, n) - h.laplacian(&u)).abs();
        let ratio = err(20.0) / err(40.0);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn cosine_discrete_laplacian_eigenvalue() {
        let h = TestFunction::cosine(vec![1, 2, 0], 4.0);
        let n = 10.0;
        let u = [0.3, 1.1, 2.0];
        let eig: f64 = [1.0, 2.0, 0.0].iter().map(|k| 2.0 * n * n * ((2.0 * PI * k / 4.0 / n).cos() - 1.0)).sum();
        assert!((h.discrete_laplacian(&u, n) - eig * h.value(&u)).abs() < 1e-10);
    }

    /// Norm by the trapezoid rule, spectrally accurate for smooth periodic
    /// integrands.
    fn quadrature_norm(h: &TestFunction, m: usize) -> f64 {
        let p = h.period();
        let step = p / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let u = [i as f64 * step, j as f64 * step, k as f64 * step];
                    s += h.value(&u).powi(2);
                }
            }
        }
        (s * step.powi(3)).sqrt()
    }

    #[test]
    fn norms_match_quadrature() {
        for h in [bump3(), TestFunction::gaussian(vec![2.0, 2.0, 2.0], 0.5, 4.0), TestFunction::cosine(vec![1, 0, 1], 4.0)] {
            let q = quadrature_norm(&h, 48);
            assert!((q / h.l2_norm() - 1.0).abs() < 1e-9, "{q} vs {}", h.l2_norm());
        }
        let c = TestFunction::Constant { value: 2.0, period: 4.0, d: 3 };
        assert!((c.l2_norm() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_coefficients_match_quadrature() {
        let h = bump3();
        let m = 48;
        let p = h.period();
        let step = p / m as f64;
        for k in [[0i64, 0, 0], [1, -1, 2], [0, 3, 1]] {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..m {
                for j in 0..m {
                    for l in 0..m {
                        let u = [i as f64 * step, j as f64 * step, l as f64 * step];
                        let ph = -2.0 * PI * (k[0] as f64 * u[0] + k[1] as f64 * u[1] + k[2] as f64 * u[2]) / p;
                        s += Complex64::from_polar(h.value(&u), ph);
                    }
                }
            }
            s /= (m * m * m) as f64;
            let c = h.fourier_coefficient(&k);
            assert!((s - c).norm() < 1e-10, "{k:?}: {s} vs {c}");
        }
    }

    proptest! {
        #[test]
        fn periodic_in_every_axis(x in 0.0f64..4.0, y in 0.0f64..4.0, z in 0.0f64..4.0, axis in 0usize..3) {
            let h = bump3();
            let u = [x, y, z];
            let mut v = u;
            v[axis] += 4.0;
            prop_assert!((h.value(&u) - h.value(&v)).abs() < 1e-12);
        }
    }
}
