//! The second-moment generator `Psi` on `Z^d` and its semigroup.
//!
//! `Psi` acts on functions of the displacement between two sites. Away from
//! the origin it is `2 lambda` times the lattice Laplacian; the origin row
//! has diagonal `1 - 2 lambda d`. With `Upsilon = Psi + 4 lambda d I` the
//! semigroup is a Poisson mixture of powers of `P = Upsilon / (4 lambda d)`,
//! which is the simple random walk kernel plus an extra weight
//! `q = (1 + 2 lambda d) / (4 lambda d)` on the origin's self-loop.
//!
//! Everything here is symmetric under sign flips, so the box is stored as
//! its nonnegative orthant with one value per lattice site.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest boundary mass accepted from a truncated computation.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Row action of `Psi` and `Upsilon` for given `(d, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiMatrix {
    pub d: usize,
    pub lambda: f64,
}

impl PsiMatrix {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d == 0 || !(lambda > 0.0) {
            return Err(Error::InvalidParams(vec![format!("Psi needs d >= 1 and lambda > 0, got d={d}, lambda={lambda}")]));
        }
        Ok(Self { d, lambda })
    }

    /// Uniformisation rate `4 lambda d`.
    pub fn rate(&self) -> f64 {
        4.0 * self.lambda * self.d as f64
    }

    /// Extra self-loop weight of `P` at the origin.
    pub fn origin_loop(&self) -> f64 {
        (1.0 + 2.0 * self.lambda * self.d as f64) / self.rate()
    }

    pub fn psi(&self, x: &[i64], y: &[i64]) -> f64 {
        let origin = x.iter().all(|&c| c == 0);
        let dist: i64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        match (dist, origin) {
            (0, true) => 1.0 - 2.0 * self.lambda * self.d as f64,
            (0, false) => -self.rate(),
            (1, _) => 2.0 * self.lambda,
            _ => 0.0,
        }
    }

    pub fn upsilon(&self, x: &[i64], y: &[i64]) -> f64 {
        let diag = if x == y { self.rate() } else { 0.0 };
        self.psi(x, y) + diag
    }

    /// Nonzero entries of row `x` of `Psi`.
    pub fn row(&self, x: &[i64]) -> Vec<(Vec<i64>, f64)> {
        let mut out = vec![(x.to_vec(), self.psi(x, x))];
        for axis in 0..self.d {
            for step in [1, -1] {
                let mut y = x.to_vec();
                y[axis] += step;
                out.push((y, 2.0 * self.lambda));
            }
        }
        out
    }
}

/// Nonnegative orthant `[0, r]^d` of the box `|x|_inf <= r`.
#[derive(Debug, Clone)]
pub struct OrthantBox {
    d: usize,
    radius: usize,
    strides: Vec<usize>,
    /// Number of lattice sites represented by each cell.
    multiplicity: Vec<f64>,
}

impl OrthantBox {
    pub fn new(d: usize, radius: usize) -> Self {
        let w = radius + 1;
        let strides: Vec<usize> = (0..d).map(|a| w.pow(a as u32)).collect();
        let len = w.pow(d as u32);
        let multiplicity = (0..len)
            .map(|i| {
                let nz = (0..d).filter(|&a| (i / strides[a]) % w != 0).count();
                (1u64 << nz) as f64
            })
            .collect();
        Self { d, radius, strides, multiplicity }
    }

    pub fn len(&self) -> usize {
        self.multiplicity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicity.is_empty()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn coords(&self, i: usize) -> Vec<i64> {
        (0..self.d).map(|a| ((i / self.strides[a]) % (self.radius + 1)) as i64).collect()
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        let mut i = 0;
        for (a, &c) in x.iter().enumerate() {
            let c = c.unsigned_abs() as usize;
            if c > self.radius {
                return None;
            }
            i += c * self.strides[a];
        }
        Some(i)
    }

    pub fn multiplicity(&self, i: usize) -> f64 {
        self.multiplicity[i]
    }

    /// `(P u)(y)`-style neighbour average with values outside the box
    /// taken as zero: `out(y) = sum_{z ~ y} u(z) / (2d)`.
    /// Returns the mass (with multiplicity) pushed out of the box.
    fn average(&self, u: &[f64], out: &mut [f64], active: usize) -> f64 {
        let d = self.d;
        let w = self.radius + 1;
        let inv = 1.0 / (2 * d) as f64;
        let lim = active.min(self.radius);
        let mut lost = 0.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut coord = vec![0usize; d];
        loop {
            let i: usize = coord.iter().zip(&self.strides).map(|(c, s)| c * s).sum();
            let mut acc = 0.0;
            for a in 0..d {
                let c = coord[a];
                let s = self.strides[a];
                if c == 0 {
                    if w > 1 {
                        acc += 2.0 * u[i + s];
                    }
                } else {
                    acc += u[i - s];
                    if c < self.radius {
                        acc += u[i + s];
                    } else {
                        lost += self.multiplicity[i] * u[i] * inv;
                    }
                }
            }
            out[i] = acc * inv;
            // odometer over [0, lim + 1]^d clipped to the box
            let mut a = 0;
            loop {
                if a == d {
                    return lost;
                }
                coord[a] += 1;
                if coord[a] <= (lim + 1).min(self.radius) {
                    break;
                }
                coord[a] = 0;
                a += 1;
            }
        }
    }
}

/// Truncated `Sum_y e^{t Psi}(O, y)` and `e^{t Psi}(O, O)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentExact {
    /// Microscopic time.
    pub t: f64,
    /// `Sum_y e^{t Psi}(O, y)`: the second moment from constant-one data.
    pub row_sum: f64,
    /// `e^{t Psi}(O, O)`.
    pub diagonal: f64,
    pub radius: usize,
    /// Poisson-weighted mass that left the box.
    pub boundary_mass: f64,
    /// Number of uniformisation terms kept.
    pub terms: usize,
}

impl SecondMomentExact {
    /// `E[eta_t(O)^2]` for i.i.d. mean-one initial values with variance `var0`.
    pub fn second_moment(&self, var0: f64) -> f64 {
        self.row_sum + self.diagonal * var0
    }
}

/// Poisson(`mean`) probabilities, cut where the terms drop below `1e-18`
/// past the mode and renormalised.
pub(crate) fn poisson_weights(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let mode = mean.floor() as usize;
    let ln_mode = -mean + mode as f64 * mean.ln() - ln_factorial(mode);
    let mut w = vec![0.0; mode + 1];
    w[mode] = ln_mode.exp();
    for n in (0..mode).rev() {
        w[n] = w[n + 1] * (n + 1) as f64 / mean;
    }
    let mut n = mode;
    while w[n] > 1e-18 {
        w.push(w[n] * mean / (n + 1) as f64);
        n += 1;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|p| *p /= total);
    w
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Default box radius: `5.5` standard deviations of one coordinate after
/// the largest retained number of steps, plus a margin.
fn default_radius(d: usize, terms: usize) -> usize {
    let r = ((terms as f64 / d as f64).sqrt() * 5.5).ceil() as usize + 3;
    r.min(terms)
}

/// `Sum_y e^{t Psi}(O, y)` on the box `|y|_inf <= radius` by uniformisation.
/// `t` is microscopic time; `radius = None` picks one from `t`.
pub fn second_moment_exact(psi: &PsiMatrix, t: f64, radius: Option<usize>) -> Result<SecondMomentExact> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(vec![format!("time must be nonnegative, got {t}")]));
    }
    let weights = poisson_weights(psi.rate() * t);
    let terms = weights.len();
    let radius = radius.unwrap_or_else(|| default_radius(psi.d, terms));
    let b = OrthantBox::new(psi.d, radius);
    let q = psi.origin_loop();
    let mut u = vec![0.0; b.len()];
    let mut next = vec![0.0; b.len()];
    u[0] = 1.0;
    let mut mass = 1.0;
    let mut tail = 1.0;
    let (mut row_sum, mut diagonal, mut boundary) = (0.0, 0.0, 0.0);
    for (n, &w) in weights.iter().enumerate() {
        row_sum += w * mass;
        diagonal += w * u[0];
        tail -= w;
        if n + 1 == terms {
            break;
        }
        let lost = b.average(&u, &mut next, n);
        next[0] += q * u[0];
        boundary += lost * tail.max(0.0);
        mass += q * u[0] - lost;
        std::mem::swap(&mut u, &mut next);
    }
    if boundary > BOUNDARY_TOLERANCE {
        return Err(Error::Truncation { boundary_mass: boundary, radius });
    }
    Ok(SecondMomentExact { t, row_sum, diagonal, radius, boundary_mass: boundary, terms })
}

/// `(e^{t Psi} f)(x)` for every `x` in the box, for a sign-symmetric `f`
/// given on the box. Values of `f` outside the box count as zero, so the
/// result is exact within distance `radius - terms` of the origin.
pub fn apply_semigroup(psi: &PsiMatrix, b: &OrthantBox, f: &[f64], t: f64) -> Vec<f64> {
    let weights = poisson_weights(psi.rate() * t);
    let q = psi.origin_loop();
    let mut g = f.to_vec();
    let mut next = vec![0.0; b.len()];
    let mut out = vec![0.0; b.len()];
    for (n, &w) in weights.iter().enumerate() {
        out.iter_mut().zip(&g).for_each(|(o, v)| *o += w * v);
        if n + 1 == weights.len() {
            break;
        }
        // P is symmetric off the origin row, so the backward step is the
        // same neighbour average plus the origin loop.
        b.average(&g, &mut next, b.radius());
        next[0] += q * g[0];
        std::mem::swap(&mut g, &mut next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{constants_for, GreenFunction};

    /// `P(S_n = 0)` for the simple random walk, by splitting the steps
    /// among the axes one axis at a time.
    fn srw_return_probs(d: usize, nmax: usize) -> Vec<f64> {
        let ln_fact: Vec<f64> = (0..=nmax).scan(0.0, |s, k| {
            if k > 0 {
                *s += (k as f64).ln();
            }
            Some(*s)
        }).collect();
        let one_d = |m: usize| -> f64 {
            if m % 2 == 1 {
                0.0
            } else {
                (ln_fact[m] - 2.0 * ln_fact[m / 2] - m as f64 * 2f64.ln()).exp()
            }
        };
        let mut r: Vec<f64> = (0..=nmax).map(one_d).collect();
        for j in 2..=d {
            let p = 1.0 / j as f64;
            let mut next = vec![0.0; nmax + 1];
            for (n, slot) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for m in (0..=n).step_by(2) {
                    let ln_binom = ln_fact[n] - ln_fact[m] - ln_fact[n - m];
                    let w = (ln_binom + m as f64 * p.ln() + (n - m) as f64 * (1.0 - p).ln()).exp();
                    s += w * one_d(m) * r[n - m];
                }
                *slot = s;
            }
            r = next;
        }
        r
    }

    /// Untruncated row sum through the renewal structure at the origin.
    fn renewal_row_sum(psi: &PsiMatrix, t: f64) -> f64 {
        let weights = poisson_weights(psi.rate() * t);
        let nmax = weights.len();
        let p = srw_return_probs(psi.d, nmax);
        // first-return probabilities of the walk
        let mut f = vec![0.0; nmax + 1];
        for n in 1..=nmax {
            f[n] = p[n] - (1..n).map(|k| f[k] * p[n - k]).sum::<f64>();
        }
        let q = psi.origin_loop();
        let mut u = vec![0.0; nmax];
        u[0] = 1.0;
        for n in 1..nmax {
            u[n] = q * u[n - 1] + (2..=n).map(|k| f[k] * u[n - k]).sum::<f64>();
        }
        let mut mass = 1.0;
        let mut total = 0.0;
        for n in 0..nmax {
            total += weights[n] * mass;
            mass += q * u[n];
        }
        total
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for mean in [0.0, 0.3, 12.0, 480.0] {
            let w = poisson_weights(mean);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "{mean}");
            let m: f64 = w.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            assert!((m - mean).abs() < 1e-9 * mean.max(1.0));
        }
    }

    #[test]
    fn psi_rows() {
        let psi = PsiMatrix::new(3, 2.0).unwrap();
        let o = [0, 0, 0];
        let row = psi.row(&o);
        assert_eq!(row.len(), 7);
        assert_eq!(row[0].1, -11.0);
        assert_eq!(psi.upsilon(&o, &o), 13.0);
        assert_eq!(psi.upsilon(&[1, 0, 0], &[1, 0, 0]), 0.0);
        let off: f64 = psi.row(&[2, 1, 0]).iter().map(|e| e.1).sum();
        assert!(off.abs() < 1e-15);
    }

    #[test]
    fn identity_at_time_zero() {
        let psi = PsiMatrix::new(3, 2.0).unwrap();
        let s = second_moment_exact(&psi, 0.0, None).unwrap();
        assert_eq!((s.row_sum, s.diagonal), (1.0, 1.0));
    }

    #[test]
    fn box_matches_renewal_oracle() {
        for (d, lambda, t) in [(3, 2.0, 1.0), (3, 2.0, 5.0), (4, 0.7, 3.0), (5, 1.0, 0.5)] {
            let psi = PsiMatrix::new(d, lambda).unwrap();
            let s = second_moment_exact(&psi, t, None).unwrap();
            let r = renewal_row_sum(&psi, t);
            assert!((s.row_sum - r).abs() < 1e-9 * r, "d={d} t={t}: {} vs {r}", s.row_sum);
        }
    }

    #[test]
    fn too_small_box_is_reported() {
        let psi = PsiMatrix::new(3, 2.0).unwrap();
        assert!(matches!(second_moment_exact(&psi, 5.0, Some(3)), Err(Error::Truncation { .. })));
    }

    #[test]
    fn increasing_towards_limit() {
        let psi = PsiMatrix::new(3, 2.0).unwrap();
        let gamma = GreenFunction::new(3).unwrap().escape_probability();
        let limit = constants_for(3, 2.0, gamma).second_moment_limit();
        let mut last = 1.0;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let s = second_moment_exact(&psi, t, None).unwrap().row_sum;
            assert!(s > last && s < limit, "t={t}: {s}");
            last = s;
        }
    }

    #[test]
    fn lambda_is_harmonic() {
        let psi = PsiMatrix::new(3, 2.0).unwrap();
        let green = GreenFunction::new(3).unwrap();
        let h = constants_for(3, 2.0, green.escape_probability()).h_lambda;
        let t = 0.15;
        let terms = poisson_weights(psi.rate() * t).len();
        let b = OrthantBox::new(3, terms + 2);
        let lam: Vec<f64> = (0..b.len()).map(|i| green.hitting_probability(&b.coords(i)) + h).collect();
        let out = apply_semigroup(&psi, &b, &lam, t);
        for x in [[0, 0, 0], [1, 0, 0], [1, 1, 0], [2, 1, 1]] {
            let i = b.index(&x).unwrap();
            assert!((out[i] - lam[i]).abs() < 1e-8, "{x:?}: {} vs {}", out[i], lam[i]);
        }
    }
}
