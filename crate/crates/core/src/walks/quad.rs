//! The walk on `(Z^d)^4` behind the fourth-moment bound.
//!
//! A point's type is fixed by which of its four coordinates coincide. The
//! matrix `G` moves a set of coinciding coordinates together to a common
//! neighbour (weight `lambda`) or stays put with a weight depending on
//! the type; the walk `S` picks one of the `M(x)` nonzero entries of row
//! `x` uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equality pattern of a point of `(Z^d)^4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointType {
    /// `(x, x, x, x)`
    I,
    /// three equal, one different
    II,
    /// two equal pairs
    III,
    /// one equal pair, two other distinct values
    IV,
    /// all distinct
    V,
}

impl PointType {
    /// 1 for type I up to 5 for type V.
    pub fn rank(self) -> usize {
        self as usize + 1
    }

    pub fn is_bad(self) -> bool {
        self != PointType::V
    }

    /// Number of nonzero entries in a row of `G`.
    pub fn m(self, d: usize) -> usize {
        match self {
            PointType::I => 30 * d + 1,
            PointType::II => 16 * d + 1,
            PointType::III => 12 * d + 1,
            PointType::IV => 10 * d + 1,
            PointType::V => 8 * d,
        }
    }

    /// Diagonal entry of `G`.
    pub fn diagonal(self) -> f64 {
        match self {
            PointType::I => 3.0,
            PointType::II | PointType::III => 2.0,
            PointType::IV => 1.0,
            PointType::V => 0.0,
        }
    }
}

/// Type of the point with coordinates `c` (four vectors of equal length).
pub fn classify_type(c: &[Vec<i64>; 4]) -> PointType {
    let p = Pattern::of(|i, j| c[i] == c[j]);
    p.kind
}

/// Coincidence structure of four coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pattern {
    kind: PointType,
    /// Position masks of the groups of equal coordinates.
    groups: [u8; 4],
    n_groups: usize,
}

impl Pattern {
    fn of(eq: impl Fn(usize, usize) -> bool) -> Self {
        let mut groups = [0u8; 4];
        let mut n_groups = 0;
        let mut assigned = 0u8;
        for i in 0..4 {
            if assigned & (1 << i) != 0 {
                continue;
            }
            let mut mask = 1u8 << i;
            for j in i + 1..4 {
                if assigned & (1 << j) == 0 && eq(i, j) {
                    mask |= 1 << j;
                }
            }
            assigned |= mask;
            groups[n_groups] = mask;
            n_groups += 1;
        }
        let largest = groups[..n_groups].iter().map(|m| m.count_ones()).max().unwrap_or(0);
        let kind = match (n_groups, largest) {
            (1, _) => PointType::I,
            (2, 3) => PointType::II,
            (2, _) => PointType::III,
            (3, _) => PointType::IV,
            _ => PointType::V,
        };
        Self { kind, groups, n_groups }
    }

    fn groups(&self) -> &[u8] {
        &self.groups[..self.n_groups]
    }
}

/// A point of `(Z^d)^4` with its type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypedPoint4 {
    pub coords: [Vec<i64>; 4],
    pub kind: PointType,
}

impl TypedPoint4 {
    pub fn new(coords: [Vec<i64>; 4]) -> Result<Self> {
        let d = coords[0].len();
        if d == 0 || coords.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidParams(vec!["the four coordinates must share a positive dimension".into()]));
        }
        let kind = classify_type(&coords);
        Ok(Self { coords, kind })
    }

    /// `(x, x, x, x)`.
    pub fn diagonal(x: &[i64]) -> Self {
        let c = x.to_vec();
        Self { coords: [c.clone(), c.clone(), c.clone(), c], kind: PointType::I }
    }

    pub fn d(&self) -> usize {
        self.coords[0].len()
    }
}

/// One nonzero entry of a row of `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G4Transition {
    pub target: TypedPoint4,
    pub g: f64,
    /// Walk probability `1 / M(source)`.
    pub probability: f64,
    /// `M G / (8 lambda d)`, raised to at least one on bad-point diagonals.
    pub h: f64,
}

/// All nonzero entries of row `x` of `G`, diagonal first.
pub fn g_transitions(x: &TypedPoint4, lambda: f64) -> Vec<G4Transition> {
    let d = x.d();
    let m = x.kind.m(d);
    let mut w = Walker::from_point(x);
    let pattern = w.pattern();
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let saved = w.data.clone();
        let step = w.apply(&pattern, j);
        let target = w.to_point();
        let g = if step.stay { x.kind.diagonal() } else { lambda };
        out.push(G4Transition { probability: 1.0 / m as f64, h: h_weight(x.kind, d, lambda, g, step.stay), g, target });
        w.data = saved;
    }
    out
}

/// `H(x, y)` for a transition of `G` with entry `g` out of a point of type `kind`.
#[inline]
pub fn h_weight(kind: PointType, d: usize, lambda: f64, g: f64, stay: bool) -> f64 {
    let w = kind.m(d) as f64 * g / (8.0 * lambda * d as f64);
    if stay && kind.is_bad() {
        w.max(1.0)
    } else {
        w
    }
}

/// Result of one step of the walk.
#[derive(Debug, Clone, Copy)]
struct Step {
    stay: bool,
    /// Positions that moved.
    moved: u8,
}

/// Mutable point of `(Z^d)^4` stored as four consecutive blocks of `d`.
#[derive(Debug, Clone)]
pub(crate) struct Walker {
    d: usize,
    data: Vec<i64>,
}

impl Walker {
    fn from_point(x: &TypedPoint4) -> Self {
        Self { d: x.d(), data: x.coords.concat() }
    }

    fn coord(&self, i: usize) -> &[i64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn to_point(&self) -> TypedPoint4 {
        let c = [0, 1, 2, 3].map(|i| self.coord(i).to_vec());
        TypedPoint4 { kind: classify_type(&c), coords: c }
    }

    fn pattern(&self) -> Pattern {
        Pattern::of(|i, j| self.coord(i) == self.coord(j))
    }

    /// Apply transition number `j` of the row (0 is the diagonal for bad points).
    fn apply(&mut self, p: &Pattern, mut j: usize) -> Step {
        if p.kind.is_bad() {
            if j == 0 {
                return Step { stay: true, moved: 0 };
            }
            j -= 1;
        }
        let dirs = 2 * self.d;
        for &mask in p.groups() {
            let k = mask.count_ones();
            let count = ((1usize << k) - 1) * dirs;
            if j >= count {
                j -= count;
                continue;
            }
            let subset = j / dirs + 1;
            let dir = j % dirs;
            // positions of the group, in order
            let mut positions = [0usize; 4];
            let mut n = 0;
            for i in 0..4 {
                if mask & (1 << i) != 0 {
                    positions[n] = i;
                    n += 1;
                }
            }
            let mut moved = 0u8;
            for (b, &pos) in positions[..n].iter().enumerate() {
                if subset & (1 << b) != 0 {
                    moved |= 1 << pos;
                    let c = pos * self.d + dir / 2;
                    self.data[c] += if dir % 2 == 0 { 1 } else { -1 };
                }
            }
            return Step { stay: false, moved };
        }
        unreachable!("transition index beyond row length")
    }

    /// Uniform step of `S`; returns the step and the source pattern.
    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (Step, Pattern) {
        let p = self.pattern();
        let m = p.kind.m(self.d);
        let j = rng.random_range(0..m);
        (self.apply(&p, j), p)
    }

    /// Does some coordinate in `{1, 2}` coincide with one in `{3, 4}`?
    fn pairs_meet(&self) -> bool {
        (0..2).any(|i| (2..4).any(|j| self.coord(i) == self.coord(j)))
    }

    fn pair_gaps(&self) -> [Vec<i64>; 6] {
        let mut out: [Vec<i64>; 6] = Default::default();
        let mut n = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                out[n] = self.coord(i).iter().zip(self.coord(j)).map(|(a, b)| a - b).collect();
                n += 1;
            }
        }
        out
    }
}

/// Initial mixed moments `F_0(y) = E[prod_i eta_0(y_i)]` for i.i.d. values:
/// a product of `moments[k]` over the groups of `k` coinciding coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMoments {
    /// `E[eta_0^k]` for `k = 0..=4`.
    pub moments: [f64; 5],
}

impl InitialMoments {
    pub fn constant_one() -> Self {
        Self { moments: [1.0; 5] }
    }

    pub fn from_marginal(m: &crate::process::Marginal) -> Self {
        Self { moments: [0, 1, 2, 3, 4].map(|k| m.moment(k)) }
    }

    fn f0(&self, p: &Pattern) -> f64 {
        p.groups().iter().map(|g| self.moments[g.count_ones() as usize]).product()
    }

    pub fn evaluate(&self, y: &TypedPoint4) -> f64 {
        self.f0(&Pattern::of(|i, j| y.coords[i] == y.coords[j]))
    }

    /// `E[eta(y1) eta(y2)] E[eta(y3) eta(y4)]`.
    fn f0_split(&self, w: &Walker) -> f64 {
        let pair = |a: usize, b: usize| {
            if w.coord(a) == w.coord(b) {
                self.moments[2]
            } else {
                self.moments[1] * self.moments[1]
            }
        };
        pair(0, 1) * pair(2, 3)
    }
}

/// `e^{t(G - 8 lambda d)} F_0` at `x`, truncated to walks of at most
/// `max_steps` steps, by enumerating every path. Exponential in
/// `max_steps`; meant for small times.
pub fn fourth_moment_series(x: &TypedPoint4, lambda: f64, t: f64, f0: &InitialMoments, max_steps: usize) -> f64 {
    let rate = 8.0 * lambda * x.d() as f64;
    fn walk(x: &TypedPoint4, lambda: f64, f0: &InitialMoments, left: usize, acc: &mut [f64], depth: usize, weight: f64) {
        acc[depth] += weight * f0.evaluate(x);
        if left == 0 {
            return;
        }
        for tr in g_transitions(x, lambda) {
            walk(&tr.target, lambda, f0, left - 1, acc, depth + 1, weight * tr.g);
        }
    }
    let mut acc = vec![0.0; max_steps + 1];
    walk(x, lambda, f0, max_steps, &mut acc, 0, 1.0);
    // sum_n t^n / n! (G^n F_0)(x), times exp(-rate t)
    let mut term = 1.0;
    let mut total = 0.0;
    for (n, a) in acc.iter().enumerate() {
        if n > 0 {
            term *= t / n as f64;
        }
        total += term * a;
    }
    total * (-rate * t).exp()
}

impl Walker {
    pub(crate) fn new(x: &TypedPoint4) -> Self {
        Self::from_point(x)
    }

    /// One step of `S` with the weight `M G / (8 lambda d)` (`raw`) and
    /// `H` (`bounded`), plus the entry of `G~` for the same move.
    #[inline]
    pub(crate) fn weighted_step<R: Rng + ?Sized>(&mut self, lambda: f64, rng: &mut R) -> StepWeights {
        let (step, p) = self.step(rng);
        let d = self.d;
        let g = if step.stay { p.kind.diagonal() } else { lambda };
        let raw = p.kind.m(d) as f64 * g / (8.0 * lambda * d as f64);
        let bounded = if step.stay && p.kind.is_bad() { raw.max(1.0) } else { raw };
        let g_split = split_entry(&p, step, lambda);
        let split = p.kind.m(d) as f64 * g_split / (8.0 * lambda * d as f64);
        StepWeights { raw, bounded, split }
    }

    pub(crate) fn kind(&self) -> PointType {
        self.pattern().kind
    }

    pub(crate) fn f0(&self, f0: &InitialMoments) -> f64 {
        f0.f0(&self.pattern())
    }

    pub(crate) fn f0_split(&self, f0: &InitialMoments) -> f64 {
        f0.f0_split(self)
    }

    pub(crate) fn meets(&self) -> bool {
        self.pairs_meet()
    }

    pub(crate) fn gaps(&self) -> [Vec<i64>; 6] {
        self.pair_gaps()
    }
}

/// Entry of `G~`, which evolves the pairs `(1, 2)` and `(3, 4)` as two
/// independent second-moment systems, for a move allowed by `G`.
fn split_entry(p: &Pattern, step: Step, lambda: f64) -> f64 {
    if step.stay {
        let together = |a: u8, b: u8| p.groups().iter().any(|m| m & (1 << a) != 0 && m & (1 << b) != 0);
        f64::from(u8::from(together(0, 1)) + u8::from(together(2, 3)))
    } else if step.moved & 0b1100 == 0 || step.moved & 0b0011 == 0 {
        lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepWeights {
    pub raw: f64,
    pub bounded: f64,
    pub split: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pt(c: [[i64; 3]; 4]) -> TypedPoint4 {
        TypedPoint4::new(c.map(|v| v.to_vec())).unwrap()
    }

    #[test]
    fn classification_examples() {
        let (x, y, z, w) = ([0, 0, 0], [1, 0, 0], [0, 2, 0], [5, 5, 5]);
        assert_eq!(pt([x, x, x, x]).kind, PointType::I);
        assert_eq!(pt([x, x, y, x]).kind, PointType::II);
        assert_eq!(pt([x, y, x, y]).kind, PointType::III);
        assert_eq!(pt([y, x, z, x]).kind, PointType::IV);
        assert_eq!(pt([x, y, z, w]).kind, PointType::V);
    }

    #[test]
    fn row_sizes_and_distinct_targets() {
        for d in [3usize, 5] {
            let o = vec![0i64; d];
            let mut e = vec![0i64; d];
            e[0] = 1;
            let mut f = vec![0i64; d];
            f[1] = 3;
            let mut g = vec![0i64; d];
            g[0] = -4;
            let points = [
                [o.clone(), o.clone(), o.clone(), o.clone()],
                [o.clone(), o.clone(), e.clone(), o.clone()],
                [o.clone(), e.clone(), e.clone(), o.clone()],
                [e.clone(), o.clone(), o.clone(), f.clone()],
                [o.clone(), e.clone(), f.clone(), g.clone()],
            ];
            for c in points {
                let x = TypedPoint4::new(c).unwrap();
                let row = g_transitions(&x, 2.0);
                assert_eq!(row.len(), x.kind.m(d), "{:?}", x.kind);
                let targets: HashSet<_> = row.iter().map(|t| t.target.coords.clone()).collect();
                assert_eq!(targets.len(), row.len());
                let p: f64 = row.iter().map(|t| t.probability).sum();
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn type_two_diagonal_and_type_five_weights() {
        let (x, y) = ([0, 0, 0], [0, 0, 7]);
        let row = g_transitions(&pt([x, x, x, y]), 2.0);
        assert_eq!(row[0].g, 2.0);
        assert_eq!(row[0].target, pt([x, x, x, y]));
        let row = g_transitions(&pt([[0, 0, 0], [3, 0, 0], [0, 3, 0], [0, 0, 3]]), 2.0);
        assert_eq!(row.len(), 24);
        assert!(row.iter().all(|t| t.h == 1.0));
        let sum: f64 = row.iter().map(|t| t.g).sum();
        assert_eq!(sum, 8.0 * 2.0 * 3.0);
    }

    /// `(G - 8 lambda d) F` at `x`, with `F(y) = prod eta(y_i)` for one fixed
    /// configuration, must equal the generator applied to
    /// `eta -> prod eta(x_i)`, computed here event by event.
    #[test]
    fn g_matches_generator_on_monomials() {
        use rand::SeedableRng;
        let d = 3usize;
        let lambda = 1.3;
        let side = 8i64;
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        let n = (side as usize).pow(3);
        let eta: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
        let idx = |c: &[i64]| -> usize {
            c.iter().rev().fold(0usize, |a, &v| a * side as usize + v.rem_euclid(side) as usize)
        };
        let monomial = |e: &[f64], y: &[Vec<i64>; 4]| y.iter().map(|c| e[idx(c)]).product::<f64>();
        let c_growth = 1.0 - 2.0 * lambda * d as f64;
        let points = [
            pt([[2, 2, 2], [2, 2, 2], [2, 2, 2], [2, 2, 2]]),
            pt([[2, 2, 2], [2, 2, 2], [3, 2, 2], [2, 2, 2]]),
            pt([[2, 2, 2], [2, 3, 2], [2, 3, 2], [2, 2, 2]]),
            pt([[2, 2, 2], [4, 2, 2], [2, 2, 2], [2, 5, 2]]),
            pt([[2, 2, 2], [4, 2, 2], [2, 4, 2], [2, 2, 4]]),
            pt([[2, 2, 2], [3, 2, 2], [2, 3, 2], [3, 3, 2]]),
        ];
        for x in points {
            let f = monomial(&eta, &x.coords);
            // generator: recoveries, infections and growth
            let mut lf = 4.0 * c_growth * f;
            let sites: HashSet<usize> = x.coords.iter().map(|c| idx(c)).collect();
            for &s in &sites {
                let mut e = eta.clone();
                e[s] = 0.0;
                lf += monomial(&e, &x.coords) - f;
                let coord = x.coords.iter().find(|c| idx(c) == s).unwrap();
                for axis in 0..d {
                    for step in [1, -1] {
                        let mut nb = coord.clone();
                        nb[axis] += step;
                        let mut e = eta.clone();
                        e[s] += eta[idx(&nb)];
                        lf += lambda * (monomial(&e, &x.coords) - f);
                    }
                }
            }
            let gf: f64 = g_transitions(&x, lambda).iter().map(|t| t.g * monomial(&eta, &t.target.coords)).sum::<f64>()
                - 8.0 * lambda * d as f64 * f;
            assert!((gf - lf).abs() < 1e-9 * lf.abs().max(1.0), "{:?}: {gf} vs {lf}", x.kind);
        }
    }

    /// Same check for `G~` against two independent configurations:
    /// `F~(y) = eta(y1) eta(y2) zeta(y3) zeta(y4)`.
    #[test]
    fn split_matrix_matches_product_generator() {
        use rand::SeedableRng;
        let d = 3usize;
        let lambda = 0.9;
        let side = 8i64;
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(4);
        let n = (side as usize).pow(3);
        let eta: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
        let zeta: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
        let idx = |c: &[i64]| -> usize {
            c.iter().rev().fold(0usize, |a, &v| a * side as usize + v.rem_euclid(side) as usize)
        };
        let pair = |e: &[f64], a: &[i64], b: &[i64]| e[idx(a)] * e[idx(b)];
        let c_growth = 1.0 - 2.0 * lambda * d as f64;
        // generator of one configuration on eta(a) eta(b)
        let pair_gen = |e: &[f64], a: &Vec<i64>, b: &Vec<i64>| -> f64 {
            let f = pair(e, a, b);
            let mut lf = 2.0 * c_growth * f;
            let sites: HashSet<usize> = [idx(a), idx(b)].into_iter().collect();
            for &s in &sites {
                let coord = if idx(a) == s { a } else { b };
                let mut e0 = e.to_vec();
                e0[s] = 0.0;
                lf += pair(&e0, a, b) - f;
                for axis in 0..d {
                    for step in [1, -1] {
                        let mut nb = coord.clone();
                        nb[axis] += step;
                        let mut e1 = e.to_vec();
                        e1[s] += e[idx(&nb)];
                        lf += lambda * (pair(&e1, a, b) - f);
                    }
                }
            }
            lf
        };
        let points = [
            pt([[2, 2, 2], [2, 2, 2], [2, 2, 2], [2, 2, 2]]),
            pt([[2, 2, 2], [2, 2, 2], [3, 2, 2], [2, 2, 2]]),
            pt([[2, 2, 2], [3, 2, 2], [2, 2, 2], [3, 2, 2]]),
            pt([[2, 2, 2], [2, 2, 2], [4, 4, 2], [4, 4, 2]]),
            pt([[2, 2, 2], [4, 2, 2], [2, 2, 2], [2, 5, 2]]),
            pt([[2, 2, 2], [3, 2, 2], [2, 3, 2], [3, 3, 2]]),
        ];
        for x in points {
            let [a, b, c, e] = &x.coords;
            let ftilde = |y: &[Vec<i64>; 4]| pair(&eta, &y[0], &y[1]) * pair(&zeta, &y[2], &y[3]);
            let expected = pair_gen(&eta, a, b) * pair(&zeta, c, e) + pair(&eta, a, b) * pair_gen(&zeta, c, e);
            let mut w = Walker::new(&x);
            let p = w.pattern();
            let mut got = -8.0 * lambda * d as f64 * ftilde(&x.coords);
            for j in 0..x.kind.m(d) {
                let saved = w.data.clone();
                let step = w.apply(&p, j);
                got += split_entry(&p, step, lambda) * ftilde(&w.to_point().coords);
                w.data = saved;
            }
            assert!((got - expected).abs() < 1e-9 * expected.abs().max(1.0), "{:?}: {got} vs {expected}", x.kind);
        }
    }

    #[test]
    fn series_at_time_zero_is_initial_moment() {
        let f0 = InitialMoments { moments: [1.0, 1.0, 2.0, 4.0, 8.0] };
        let x = TypedPoint4::diagonal(&[0, 0, 0]);
        assert_eq!(fourth_moment_series(&x, 2.0, 0.0, &f0, 2), 8.0);
    }

    #[test]
    fn split_weight_equals_g_while_pairs_are_apart() {
        use rand::SeedableRng;
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(8);
        let x = pt([[0, 0, 0], [0, 0, 0], [9, 0, 0], [9, 0, 0]]);
        let mut w = Walker::new(&x);
        for _ in 0..50 {
            if w.meets() {
                break;
            }
            let s = w.weighted_step(2.0, &mut rng);
            assert_eq!(s.raw, s.split);
        }
    }
}
