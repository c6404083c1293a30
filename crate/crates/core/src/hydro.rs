//! The macroscopic heat-type equation
//! `d rho/dt = lambda Lap rho - 2 lambda1 sum_i d_i rho + lambda2 rho`
//! on the torus `[0, L/N)^d`, and its comparison with the empirical
//! measure of the simulated process.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{constants, ModelParams, Torus};
use crate::process::{Configuration, InitialLaw, Process};
use crate::rng::replica_rng;
use crate::spectral::{fft_nd, mode_of};
use crate::stats::Moments;
use crate::test_function::TestFunction;

/// Grid values of a density on the lattice sites mapped to `x / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub d: usize,
    /// Grid points per axis, the lattice side `L`.
    pub side: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl DensityProfile {
    pub fn from_fn(params: &ModelParams, f: impl Fn(&[f64]) -> f64) -> Self {
        let torus = Torus::new(params.d, params.side);
        let n = params.n_f64();
        let values = (0..torus.len()).map(|i| f(&torus.position(i, n))).collect();
        DensityProfile { d: params.d, side: params.side, n: params.n, values }
    }

    /// Mean profile `E[eta_0(x)]` of an initial law.
    pub fn initial(params: &ModelParams, law: &InitialLaw) -> Self {
        let mean = law.marginal().mean();
        let period = params.period();
        match law {
            InitialLaw::Iid { .. } => Self::from_fn(params, |_| mean),
            InitialLaw::Profile { shape, .. } => Self::from_fn(params, |u| mean * shape.value(u, period)),
        }
    }

    pub fn period(&self) -> f64 {
        self.side as f64 / self.n as f64
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        let mut errs = Vec::new();
        if self.d != params.d || self.side != params.side || self.n != params.n {
            errs.push(format!(
                "profile grid (d={}, L={}, N={}) does not match parameters (d={}, L={}, N={})",
                self.d, self.side, self.n, params.d, params.side, params.n
            ));
        }
        if self.values.len() != self.side.pow(self.d as u32) {
            errs.push(format!("profile has {} values for a {}^{} grid", self.values.len(), self.side, self.d));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// Discrete Fourier coefficients `c_k`, normalized so that a constant
    /// profile `c` has `c_0 = c`.
    pub fn modes(&self) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut data, self.d, self.side, false);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// `int rho G` as the Riemann sum `N^{-d} sum_x rho(x/N) G(x/N)`.
    pub fn pairing(&self, g: &[f64]) -> f64 {
        let w = (self.n as f64).powi(-(self.d as i32));
        w * self.values.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn mass(&self) -> f64 {
        let w = (self.n as f64).powi(-(self.d as i32));
        w * self.values.iter().sum::<f64>()
    }

    /// Circular centre of mass along `axis`, in `[0, period)`.
    pub fn center(&self, axis: usize) -> f64 {
        let torus = Torus::new(self.d, self.side);
        circular_center(&torus, axis, self.values.iter().copied()) * self.period()
    }
}

/// Circular mean position along `axis` of nonnegative site weights, in
/// lattice units divided by `side`, mapped to `[0, 1)`.
fn circular_center(torus: &Torus, axis: usize, weights: impl Iterator<Item = f64>) -> f64 {
    let side = torus.side() as f64;
    let z: Complex64 = weights
        .enumerate()
        .map(|(i, w)| Complex64::from_polar(w, 2.0 * PI * torus.coord(i, axis) as f64 / side))
        .sum();
    (z.arg() / (2.0 * PI)).rem_euclid(1.0)
}

/// Circular centre of mass of a configuration along `axis`, in
/// macroscopic units.
pub fn configuration_center(cfg: &Configuration, process: &Process, axis: usize) -> f64 {
    let p = process.params();
    circular_center(process.torus(), axis, (0..cfg.len()).map(|x| cfg.value(x))) * p.period()
}

/// Spectral evolution: mode `k` is multiplied by
/// `exp(-lambda |w|^2 t - 2 i lambda1 sum_i w_i t + lambda2 t)`,
/// `w = 2 pi k / (L/N)`. The Nyquist bin of an even grid keeps only the
/// real part of its phase so the result stays real.
pub fn solve_pde(rho0: &DensityProfile, params: &ModelParams, t: f64) -> Result<DensityProfile> {
    rho0.check(params)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(vec![format!("time must be nonnegative, got {t}")]));
    }
    let (d, side) = (rho0.d, rho0.side);
    let period = rho0.period();
    let mut data: Vec<Complex64> = rho0.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, d, side, false);
    for (i, c) in data.iter_mut().enumerate() {
        let k = mode_of(i, d, side);
        let w: Vec<f64> = k.iter().map(|&k| 2.0 * PI * k as f64 / period).collect();
        let w2: f64 = w.iter().map(|x| x * x).sum();
        let phase = -2.0 * params.lambda1 * w.iter().sum::<f64>() * t;
        let nyquist = side % 2 == 0 && k.iter().any(|&k| 2 * k.unsigned_abs() as usize == side);
        let decay = (-params.lambda * w2 * t + params.lambda2 * t).exp();
        *c *= if nyquist { Complex64::new(decay * phase.cos(), 0.0) } else { Complex64::from_polar(decay, phase) };
    }
    fft_nd(&mut data, d, side, true);
    let scale = 1.0 / data.len() as f64;
    Ok(DensityProfile { d, side, n: rho0.n, values: data.iter().map(|c| c.re * scale).collect() })
}

/// `G(x / N)` at every lattice site.
pub fn sample_on_lattice(g: &TestFunction, params: &ModelParams) -> Vec<f64> {
    DensityProfile::from_fn(params, |u| g.value(u)).values
}

/// `<pi^N, G> = N^{-d} sum_x eta(x) G(x/N)` with `G` pre-sampled on the
/// lattice.
pub fn empirical_pairing(cfg: &Configuration, params: &ModelParams, g: &[f64]) -> f64 {
    let w = params.n_f64().powi(-(params.d as i32));
    let (raw, scale) = cfg.raw();
    w * scale * raw.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

/// One cell of [`lln_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnCell {
    pub t: f64,
    pub g_index: usize,
    pub predicted: f64,
    pub simulated: f64,
    pub simulated_stderr: f64,
    /// Replica mean of `|<pi_t, G> - <rho_t, G>|`.
    pub abs_error: f64,
    pub abs_error_stderr: f64,
    pub g_norm: f64,
}

/// Shift of the circular centre of mass along the first axis since time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCell {
    pub t: f64,
    pub predicted: f64,
    pub simulated: f64,
    pub simulated_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnTable {
    pub n: usize,
    pub side: usize,
    pub replicas: usize,
    pub cells: Vec<LlnCell>,
    pub drift: Vec<DriftCell>,
    pub events: u64,
    pub warnings: Vec<String>,
}

/// One replica's observations at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPairings {
    /// `pairings[t][g] = <pi_t, G_g>`.
    pub pairings: Vec<Vec<f64>>,
    /// Centre-of-mass shift along the first axis, wrapped to half a period.
    pub shifts: Vec<f64>,
    pub events: u64,
}

fn wrap_shift(delta: f64, period: f64) -> f64 {
    let x = delta.rem_euclid(period);
    if x >= 0.5 * period {
        x - period
    } else {
        x
    }
}

/// Pairings of one replica at each checkpoint, with its centre-of-mass drift.
pub fn replica_pairings(
    process: &Process,
    law: &InitialLaw,
    gs: &[Vec<f64>],
    ts: &[f64],
    seed: u64,
    replica: u64,
) -> Result<ReplicaPairings> {
    let mut rng = replica_rng(seed, replica);
    let mut cfg = process.init_config(law, &mut rng)?;
    let period = process.params().period();
    let c0 = configuration_center(&cfg, process, 0);
    let mut out = ReplicaPairings { pairings: Vec::new(), shifts: Vec::new(), events: 0 };
    for &t in ts {
        out.events += process.run_until(&mut cfg, t, &mut rng)?;
        out.pairings.push(gs.iter().map(|g| empirical_pairing(&cfg, process.params(), g)).collect());
        out.shifts.push(wrap_shift(configuration_center(&cfg, process, 0) - c0, period));
    }
    Ok(out)
}

/// Replica-averaged `|<pi_t^N, G> - <rho_t, G>|` for every `(t, G)`.
/// `ts` must be increasing.
pub fn lln_error(
    params: &ModelParams,
    law: &InitialLaw,
    gs: &[TestFunction],
    ts: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<LlnTable> {
    check_lln_inputs(params, law, ts)?;
    let process = Process::new(params.clone())?;
    let sampled: Vec<Vec<f64>> = gs.iter().map(|g| sample_on_lattice(g, params)).collect();
    let runs: Vec<Result<ReplicaPairings>> = (0..replicas)
        .into_par_iter()
        .map(|r| replica_pairings(&process, law, &sampled, ts, seed, r as u64))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    lln_table(params, law, gs, ts, &runs)
}

fn check_lln_inputs(params: &ModelParams, law: &InitialLaw, ts: &[f64]) -> Result<()> {
    params.validate()?;
    law.validate(params.d)?;
    if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParams(vec!["checkpoint times must be nonnegative and increasing".into()]));
    }
    Ok(())
}

/// Compare finished replicas of [`replica_pairings`] with the PDE.
pub fn lln_table(
    params: &ModelParams,
    law: &InitialLaw,
    gs: &[TestFunction],
    ts: &[f64],
    runs: &[ReplicaPairings],
) -> Result<LlnTable> {
    check_lln_inputs(params, law, ts)?;
    let mut warnings = Vec::new();
    let c = constants(params)?;
    if !c.supercritical {
        warnings.push(format!(
            "lambda = {} is below the second-moment threshold {:.4}; the limit may not hold",
            params.lambda, c.lambda_threshold
        ));
    }
    let sampled: Vec<Vec<f64>> = gs.iter().map(|g| sample_on_lattice(g, params)).collect();
    let rho0 = DensityProfile::initial(params, law);
    let mut cells = Vec::new();
    let mut drift = Vec::new();
    for (ti, &t) in ts.iter().enumerate() {
        let rho = solve_pde(&rho0, params, t)?;
        for (gi, g) in gs.iter().enumerate() {
            let pred = rho.pairing(&sampled[gi]);
            let sim: Moments = runs.iter().map(|v| v.pairings[ti][gi]).collect();
            let err: Moments = runs.iter().map(|v| (v.pairings[ti][gi] - pred).abs()).collect();
            cells.push(LlnCell {
                t,
                g_index: gi,
                predicted: pred,
                simulated: sim.mean,
                simulated_stderr: sim.stderr(),
                abs_error: err.mean,
                abs_error_stderr: err.stderr(),
                g_norm: g.l2_norm(),
            });
        }
        let m: Moments = runs.iter().map(|v| v.shifts[ti]).collect();
        drift.push(DriftCell {
            t,
            predicted: wrap_shift(rho.center(0) - rho0.center(0), params.period()),
            simulated: m.mean,
            simulated_stderr: m.stderr(),
        });
    }
    let events = runs.iter().map(|r| r.events).sum();
    Ok(LlnTable { n: params.n, side: params.side, replicas: runs.len(), cells, drift, events, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{DensityShape, Marginal};

    fn params(lambda1: f64, lambda2: f64) -> ModelParams {
        ModelParams::new(3, 2.0, lambda1, lambda2, 4, 16, 1.0).unwrap()
    }

    fn bump(p: &ModelParams, width: f64) -> DensityProfile {
        let shape = DensityShape::Bump { level: 0.0, amplitude: 1.0, center: vec![2.0, 2.0, 2.0], width };
        DensityProfile::from_fn(p, |u| shape.value(u, p.period()))
    }

    #[test]
    fn constants_are_stationary_or_grow() {
        let p = params(0.7, 0.0);
        let flat = DensityProfile::from_fn(&p, |_| 2.5);
        let out = solve_pde(&flat, &p, 0.8).unwrap();
        assert!(out.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let p = params(0.0, 1.5);
        let out = solve_pde(&DensityProfile::from_fn(&p, |_| 2.5), &p, 0.8).unwrap();
        assert!(out.values.iter().all(|v| (v - 2.5 * (1.2f64).exp()).abs() < 1e-11));
    }

    /// The mode amplitude integrated by RK4 at two step sizes and
    /// Richardson-extrapolated.
    #[test]
    fn cosine_mode_decays_at_the_heat_rate() {
        let p = params(0.0, 0.0);
        let h = TestFunction::cosine(vec![1, 1, 0], p.period());
        let rho0 = DensityProfile::from_fn(&p, |u| 1.0 + 0.3 * h.value(u));
        let t = 0.05;
        let out = solve_pde(&rho0, &p, t).unwrap();
        let w2 = 2.0 * (2.0 * PI / p.period()).powi(2);
        let rk4 = |steps: usize| {
            let dt = t / steps as f64;
            let f = |a: f64| -p.lambda * w2 * a;
            let mut a = 1.0;
            for _ in 0..steps {
                let k1 = f(a);
                let k2 = f(a + 0.5 * dt * k1);
                let k3 = f(a + 0.5 * dt * k2);
                let k4 = f(a + dt * k3);
                a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            a
        };
        let (a1, a2) = (rk4(50), rk4(100));
        let factor = a2 + (a2 - a1) / 15.0;
        let torus = Torus::new(3, p.side);
        for i in (0..out.values.len()).step_by(37) {
            let u = torus.position(i, p.n_f64());
            let expect = 1.0 + 0.3 * factor * h.value(&u);
            assert!((out.values[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_is_conserved_and_semigroup_holds() {
        let p = params(0.5, 0.0);
        let rho0 = bump(&p, 0.6);
        let a = solve_pde(&rho0, &p, 0.3).unwrap();
        assert!((a.mass() - rho0.mass()).abs() < 1e-12 * rho0.mass());
        let b = solve_pde(&solve_pde(&rho0, &p, 0.1).unwrap(), &p, 0.2).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn nonnegative_data_stays_nonnegative() {
        let p = params(0.0, 0.0);
        let out = solve_pde(&bump(&p, 0.6), &p, 0.2).unwrap();
        assert!(out.values.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn drift_translates_a_bump() {
        // A finer grid keeps the bump resolved: N = 8, L = 32, width 0.3.
        let p = ModelParams::new(3, 0.1, 0.5, 0.0, 8, 32, 1.0).unwrap();
        let rho0 = bump(&p, 0.3);
        let t = 0.5;
        let out = solve_pde(&rho0, &p, t).unwrap();
        for axis in 0..3 {
            let moved = out.center(axis) - rho0.center(axis);
            let expect = 2.0 * p.lambda1 * t;
            assert!((moved - expect).abs() < 0.01 * expect, "axis {axis}: {moved} vs {expect}");
        }
    }

    #[test]
    fn rejects_mismatched_grid() {
        let p = params(0.0, 0.0);
        let q = ModelParams::new(3, 2.0, 0.0, 0.0, 4, 12, 1.0).unwrap();
        assert!(solve_pde(&DensityProfile::from_fn(&q, |_| 1.0), &p, 0.1).is_err());
    }

    #[test]
    fn pairings_on_constant_configurations() {
        let p = ModelParams::new(3, 2.0, 0.0, 0.0, 5, 10, 1.0).unwrap();
        let cfg = Configuration::from_values(vec![1.0; 1000], p.growth_rate());
        let one = sample_on_lattice(&TestFunction::Constant { value: 1.0, period: 2.0, d: 3 }, &p);
        assert!((empirical_pairing(&cfg, &p, &one) - 8.0).abs() < 1e-12);
        let cos = sample_on_lattice(&TestFunction::cosine(vec![1, 0, 2], 2.0), &p);
        assert!(empirical_pairing(&cfg, &p, &cos).abs() < 1e-12);
    }

    #[test]
    fn initial_pairing_matches_profile_integral() {
        // At t = 0 only sampling noise of the i.i.d. marks remains: the
        // replica mean must match the profile pairing within 4 stderr.
        let p = ModelParams::new(3, 2.0, 0.0, 0.0, 4, 16, 1.0).unwrap();
        let shape = DensityShape::Bump { level: 0.2, amplitude: 1.0, center: vec![2.0, 2.0, 2.0], width: 0.5 };
        let law = InitialLaw::Profile { shape, marginal: Marginal::two_point() };
        let g = TestFunction::gaussian(vec![2.0, 1.5, 2.0], 0.7, p.period());
        let table = lln_error(&p, &law, &[g], &[0.0], 200, 5).unwrap();
        let c = &table.cells[0];
        assert!((c.simulated - c.predicted).abs() < 4.0 * c.simulated_stderr, "{c:?}");
        assert_eq!(table.events, 0);
    }
}
