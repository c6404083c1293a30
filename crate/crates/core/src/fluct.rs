//! The density fluctuation field `Y_t(H) = N^{-(1+d/2)} sum_x (eta_t(x) - m) H(x/N)`,
//! its Dynkin martingale and predictable quadratic variation, and the
//! Ornstein-Uhlenbeck variance it is compared with.
//!
//! Times in this module are macroscopic unless a name says `micro`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::sample_on_lattice;
use crate::lattice::{DerivedConstants, Direction, ModelParams};
use crate::process::{Configuration, EventRecord, Process};
use crate::spectral::{fft_nd, mode_of};
use crate::test_function::TestFunction;

/// `N^{-(1+d/2)}`.
pub fn field_scale(params: &ModelParams) -> f64 {
    params.n_f64().powf(-(1.0 + params.d as f64 / 2.0))
}

/// Lattice weights of one test function: `h(x) = H(x/N)`, drift weights
/// `w` with `N^2 L_N Y(H) = N^{-(1+d/2)} (sum_x eta(x) w(x) - m w_offset)`,
/// and quadratic-variation weights `v` with
/// `N^2 (L f^2 - 2 f L f) = N^{-d} sum_x eta(x)^2 v(x)` for `f = Y(H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldWeights {
    pub h: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub h_sum: f64,
    /// `sum_x w(x) - lambda2 sum_x h(x)`, zero up to rounding; it
    /// multiplies the centring constant in the drift.
    pub w_offset: f64,
}

impl FieldWeights {
    pub fn new(process: &Process, test: &TestFunction) -> Self {
        let p = process.params();
        let h = sample_on_lattice(test, p);
        let n = p.n_f64();
        let (plus, minus) = (p.rate_from_plus(), p.rate_from_minus());
        let mut w = vec![0.0; h.len()];
        let mut v = vec![0.0; h.len()];
        for x in 0..h.len() {
            let mut lap = 0.0;
            let mut grad = 0.0;
            let mut qv = h[x] * h[x];
            for axis in 0..p.d {
                let hp = h[process.neighbor(x, Direction { axis, positive: true })];
                let hm = h[process.neighbor(x, Direction { axis, positive: false })];
                lap += hp + hm - 2.0 * h[x];
                grad += hp - hm;
                // x feeds x - e_i at rate lambda - lambda1/N and x + e_i at
                // lambda + lambda1/N.
                qv += plus * hm * hm + minus * hp * hp;
            }
            w[x] = p.lambda * n * n * lap + p.lambda1 * n * grad + p.lambda2 * h[x];
            v[x] = qv;
        }
        let h_sum: f64 = h.iter().sum();
        let w_offset = w.iter().sum::<f64>() - p.lambda2 * h_sum;
        FieldWeights { h, w, v, h_sum, w_offset }
    }
}

/// `Y(H)` for a configuration, centring at `mean_field`.
pub fn field_eval(cfg: &Configuration, process: &Process, test: &TestFunction, mean_field: f64) -> f64 {
    let h = sample_on_lattice(test, process.params());
    field_scale(process.params()) * (0..cfg.len()).map(|x| (cfg.value(x) - mean_field) * h[x]).sum::<f64>()
}

/// `N^2 L_N Y(H)`: `lambda Y(Lap_N H) + 2 lambda1 Y(grad_N H)` with central
/// differences, plus the `lambda2` growth of the uncentred field.
pub fn dynkin_drift(cfg: &Configuration, process: &Process, test: &TestFunction, mean_field: f64) -> f64 {
    let fw = FieldWeights::new(process, test);
    let p = process.params();
    let s: f64 = (0..cfg.len()).map(|x| cfg.value(x) * fw.w[x]).sum();
    field_scale(p) * (s - mean_field * fw.w_offset)
}

/// `N^{-d} sum_x eta(x)^2 (H(x/N)^2 + sum_{i,+-} r_{+-} H((x +- e_i)/N)^2)`.
pub fn qv_integrand(cfg: &Configuration, process: &Process, test: &TestFunction) -> f64 {
    let fw = FieldWeights::new(process, test);
    let p = process.params();
    p.n_f64().powi(-(p.d as i32)) * (0..cfg.len()).map(|x| cfg.value(x).powi(2) * fw.v[x]).sum::<f64>()
}

/// Running state for one test function.
#[derive(Debug, Clone)]
struct Track {
    fw: FieldWeights,
    /// `sum u h`, `sum u w`, `sum u^2 v` over stored values `u`.
    a_h: f64,
    a_w: f64,
    a_v: f64,
    y0: f64,
    /// Drift and QV integrals (before the constant factors) over closed
    /// epoch segments.
    drift_closed: f64,
    qv_closed: f64,
    /// `A(s0) E(s0)` at the start of the open segment and
    /// `sum_k dA_k E(t_k)` over its events.
    w_start: f64,
    v_start: f64,
    w_events: f64,
    v_events: f64,
    max_jump: f64,
}

/// Values of the instrumented observables for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValues {
    pub y: f64,
    /// `Y_t - Y_0 - int_0^t N^2 L_N Y ds`.
    pub martingale: f64,
    pub drift_integral: f64,
    /// `int_0^t qv_integrand ds`.
    pub qv_integral: f64,
    /// Largest `|Y_t - Y_{t-}|` so far.
    pub max_jump: f64,
}

/// All tracked values at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub t: f64,
    pub values: Vec<FieldValues>,
    /// Instantaneous `qv_integrand` per test function.
    pub qv_rate: Vec<f64>,
}

/// Follows `Y(H)` for a list of test functions along one simulated path.
///
/// Between events every site grows by the same factor, so `sum eta w`
/// is `A_w exp(c (t - epoch))` with `A_w` constant, and its time integral
/// has the antiderivative `A_w E(t)`, `E(t) = exp(c (t - epoch)) / c`.
/// Summing by parts over an epoch segment leaves
/// `A(end) E(end) - A(start) E(start) - sum_events dA E(t_event)`,
/// one exponential per event. Same for `sum eta^2 v` with `2c`.
#[derive(Debug, Clone)]
pub struct FieldTracker {
    tracks: Vec<Track>,
    /// `(h, w, v)` of every track, site-major, so an event touches one
    /// or two cache lines.
    packed: Vec<f64>,
    mean_field: f64,
    scale: f64,
    /// `N^{-d}`.
    density: f64,
    n2: f64,
    c: f64,
    epoch: f64,
    start_time: f64,
    last: f64,
}

impl FieldTracker {
    pub fn new(process: &Process, tests: &[TestFunction], mean_field: f64, cfg: &Configuration) -> Self {
        let p = process.params();
        let tracks = tests
            .iter()
            .map(|t| Track {
                fw: FieldWeights::new(process, t),
                a_h: 0.0,
                a_w: 0.0,
                a_v: 0.0,
                y0: 0.0,
                drift_closed: 0.0,
                qv_closed: 0.0,
                w_start: 0.0,
                v_start: 0.0,
                w_events: 0.0,
                v_events: 0.0,
                max_jump: 0.0,
            })
            .collect::<Vec<Track>>();
        let sites = cfg.len();
        let mut packed = Vec::with_capacity(3 * tracks.len() * sites);
        for x in 0..sites {
            for tr in &tracks {
                packed.extend([tr.fw.h[x], tr.fw.w[x], tr.fw.v[x]]);
            }
        }
        let mut tracker = FieldTracker {
            tracks,
            packed,
            mean_field,
            scale: field_scale(p),
            density: p.n_f64().powi(-(p.d as i32)),
            n2: p.n_f64() * p.n_f64(),
            c: cfg.growth_rate(),
            epoch: cfg.epoch(),
            start_time: cfg.current_time(),
            last: cfg.current_time(),
        };
        tracker.open_segment(cfg, tracker.last);
        for i in 0..tracker.tracks.len() {
            tracker.tracks[i].y0 = tracker.y_at(i, tracker.last);
        }
        tracker
    }

    /// Antiderivatives of the growth factor and of its square.
    fn antiderivatives(&self, factor: f64, t: f64) -> (f64, f64) {
        if self.c == 0.0 {
            (t - self.epoch, t - self.epoch)
        } else {
            (factor / self.c, factor * factor / (2.0 * self.c))
        }
    }

    fn growth(&self, t: f64) -> f64 {
        (self.c * (t - self.epoch)).exp()
    }

    /// Recompute the stored sums from `cfg` and start a segment at `t`.
    fn open_segment(&mut self, cfg: &Configuration, t: f64) {
        self.epoch = cfg.epoch();
        let (e1, e2) = self.antiderivatives(self.growth(t), t);
        let (raw, _) = cfg.raw();
        for tr in &mut self.tracks {
            let (mut a_h, mut a_w, mut a_v) = (0.0, 0.0, 0.0);
            for (x, &u) in raw.iter().enumerate() {
                a_h += u * tr.fw.h[x];
                a_w += u * tr.fw.w[x];
                a_v += u * u * tr.fw.v[x];
            }
            tr.a_h = a_h;
            tr.a_w = a_w;
            tr.a_v = a_v;
            tr.w_start = a_w * e1;
            tr.v_start = a_v * e2;
            tr.w_events = 0.0;
            tr.v_events = 0.0;
        }
    }

    /// Integrals of `sum eta w` and `sum eta^2 v` over the open segment up
    /// to `t`, with no event after the last one seen.
    fn open_integrals(&self, tr: &Track, t: f64) -> (f64, f64) {
        let (e1, e2) = self.antiderivatives(self.growth(t), t);
        (tr.a_w * e1 - tr.w_start - tr.w_events, tr.a_v * e2 - tr.v_start - tr.v_events)
    }

    fn close_segment(&mut self, t: f64) {
        for i in 0..self.tracks.len() {
            let (w, v) = self.open_integrals(&self.tracks[i], t);
            let tr = &mut self.tracks[i];
            tr.drift_closed += w;
            tr.qv_closed += v;
        }
    }

    fn y_at(&self, i: usize, t: f64) -> f64 {
        let tr = &self.tracks[i];
        self.scale * (tr.a_h * self.growth(t) - self.mean_field * tr.fw.h_sum)
    }

    /// Account for one applied event; `cfg` is the configuration after it.
    pub fn on_event(&mut self, cfg: &Configuration, rec: &EventRecord) {
        self.last = rec.time;
        if rec.epoch != self.epoch {
            // The epoch moved just before this event: the sums still hold
            // pre-event values in the old epoch.
            let factor = (self.c * (rec.time - rec.epoch)).exp();
            let du = rec.after - rec.before;
            for tr in &mut self.tracks {
                let jump = (self.scale * du * factor * tr.fw.h[rec.site]).abs();
                tr.max_jump = tr.max_jump.max(jump);
            }
            self.close_segment(rec.time);
            self.open_segment(cfg, rec.time);
            return;
        }
        let factor = rec.eta_factor(self.c);
        let (e1, e2) = self.antiderivatives(factor, rec.time);
        let x = rec.site;
        let du = rec.after - rec.before;
        let dv = rec.after * rec.after - rec.before * rec.before;
        let scale = self.scale;
        let stride = 3 * self.tracks.len();
        let weights = &self.packed[x * stride..(x + 1) * stride];
        for (tr, hwv) in self.tracks.iter_mut().zip(weights.chunks_exact(3)) {
            let (h, w, v) = (hwv[0], hwv[1], hwv[2]);
            tr.max_jump = tr.max_jump.max((scale * du * factor * h).abs());
            tr.a_h += du * h;
            tr.a_w += du * w;
            tr.w_events += du * w * e1;
            tr.a_v += dv * v;
            tr.v_events += dv * v * e2;
        }
    }

    /// Bring the tracker to the configuration's clock after a run that
    /// ended without an event, or after a synchronisation.
    pub fn catch_up(&mut self, cfg: &Configuration) {
        let t = cfg.current_time();
        self.last = t;
        if cfg.epoch() != self.epoch {
            self.close_segment(t);
            self.open_segment(cfg, t);
        }
    }

    pub fn values(&self) -> Vec<FieldValues> {
        let elapsed = self.last - self.start_time;
        (0..self.tracks.len())
            .map(|i| {
                let tr = &self.tracks[i];
                let (w, v) = self.open_integrals(tr, self.last);
                let drift = self.scale * ((tr.drift_closed + w) - self.mean_field * tr.fw.w_offset * elapsed) / self.n2;
                let y = self.y_at(i, self.last);
                FieldValues {
                    y,
                    martingale: y - tr.y0 - drift,
                    drift_integral: drift,
                    qv_integral: self.density * (tr.qv_closed + v) / self.n2,
                    max_jump: tr.max_jump,
                }
            })
            .collect()
    }

    /// Current `qv_integrand` per test function.
    pub fn qv_rates(&self) -> Vec<f64> {
        let g = self.growth(self.last);
        self.tracks.iter().map(|tr| self.density * tr.a_v * g * g).collect()
    }

    pub fn sample(&self, t_macro: f64) -> FieldSample {
        FieldSample { t: t_macro, values: self.values(), qv_rate: self.qv_rates() }
    }
}

/// Simulate to macroscopic time `t_macro`, feeding every event to the
/// tracker, then synchronise. Returns the number of events.
pub fn run_tracked<R: Rng + ?Sized>(
    process: &Process,
    cfg: &mut Configuration,
    tracker: &mut FieldTracker,
    t_macro: f64,
    rng: &mut R,
) -> Result<u64> {
    let until = process.params().micro_time(t_macro);
    if until < cfg.current_time() {
        return Err(Error::TimeReversal { target: until, current: cfg.current_time() });
    }
    let mut events = 0;
    while let Some(rec) = process.next_event_before(cfg, until, rng)? {
        tracker.on_event(cfg, &rec);
        events += 1;
    }
    cfg.synchronize()?;
    tracker.catch_up(cfg);
    Ok(events)
}

/// `C(lambda, d) int_0^t ||T_s H||_2^2 ds` for the semigroup of
/// `lambda Lap - 2 lambda1 sum_i d_i`, from the Fourier coefficients of `H`
/// on a grid of `resolution` points per axis.
pub fn ou_variance(test: &TestFunction, lambda: f64, consts: &DerivedConstants, t: f64, resolution: usize) -> Result<f64> {
    if !(consts.h_lambda > 0.0) {
        return Err(Error::Subcritical { h_lambda: consts.h_lambda, threshold: consts.lambda_threshold });
    }
    let d = test.d();
    let p = test.period();
    let step = p / resolution as f64;
    let total = resolution.pow(d as u32);
    let mut data: Vec<Complex64> = (0..total)
        .map(|i| {
            let mut rem = i;
            let mut u = vec![0.0; d];
            for a in (0..d).rev() {
                u[a] = (rem % resolution) as f64 * step;
                rem /= resolution;
            }
            Complex64::new(test.value(&u), 0.0)
        })
        .collect();
    fft_nd(&mut data, d, resolution, false);
    let vol = p.powi(d as i32);
    let mut sum = 0.0;
    for (i, c) in data.iter().enumerate() {
        let coeff = c.norm_sqr() / (total as f64).powi(2);
        let k = mode_of(i, d, resolution);
        let w2: f64 = k.iter().map(|&k| (2.0 * PI * k as f64 / p).powi(2)).sum();
        sum += coeff * time_factor(lambda, w2, t);
    }
    Ok(consts.c_lambda_d * vol * sum)
}

/// `int_0^t exp(-2 lambda w2 s) ds`.
pub fn time_factor(lambda: f64, w2: f64, t: f64) -> f64 {
    let a = 2.0 * lambda * w2;
    if a == 0.0 {
        t
    } else {
        -(-a * t).exp_m1() / a
    }
}

/// Multiply a `(t, Y_t)` path by `exp(lambda2 t)`.
pub fn lambda2_transform(path: &[(f64, f64)], lambda2: f64) -> Vec<(f64, f64)> {
    path.iter().map(|&(t, y)| (t, y * (lambda2 * t).exp())).collect()
}
