//! Gillespie simulation of the contact path process on a torus.
//!
//! One global exponential clock with rate `L^d (1 + 2 lambda d)` picks a
//! uniform site and then the kind of event. Between events every value
//! grows by the same factor `exp(c dt)`, so values are stored relative to a
//! shared epoch, `eta_t(x) = stored(x) exp(c (t - epoch))`, and the growth
//! is folded into the stored values only every few time units.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::law::InitialLaw;
use crate::error::{Error, Result};
use crate::lattice::{Direction, ModelParams, Torus};

/// Values above this abort the run.
pub const OVERFLOW_LIMIT: f64 = 1e300;
/// Values below this are flushed to zero.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;

/// Largest `|c (t - epoch)|` before the epoch is moved.
const MAX_LOG_DRIFT: f64 = 30.0;

/// Microscopic state `eta` with lazily applied growth.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    values: Vec<f64>,
    epoch: f64,
    growth_rate: f64,
    current_time: f64,
    /// Stored values above this may correspond to an overflowing `eta`.
    overflow_guard: f64,
}

impl Configuration {
    pub fn from_values(values: Vec<f64>, growth_rate: f64) -> Self {
        Self {
            values,
            epoch: 0.0,
            growth_rate,
            current_time: 0.0,
            overflow_guard: OVERFLOW_LIMIT * (-MAX_LOG_DRIFT).exp(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Microscopic time.
    pub fn current_time(&self) -> f64 {
        self.current_time
    }

    pub fn growth_rate(&self) -> f64 {
        self.growth_rate
    }

    /// Time at which stored values equal site values.
    pub fn epoch(&self) -> f64 {
        self.epoch
    }

    #[inline]
    fn scale_at(&self, t: f64) -> f64 {
        (self.growth_rate * (t - self.epoch)).exp()
    }

    /// `eta_t(x)` for any `t` not before the last event.
    pub fn value_at(&self, x: usize, t: f64) -> f64 {
        self.values[x] * self.scale_at(t)
    }

    /// `eta(x)` at the current time.
    pub fn value(&self, x: usize) -> f64 {
        self.value_at(x, self.current_time)
    }

    /// Current values of all sites.
    pub fn current_values(&self) -> Vec<f64> {
        let s = self.scale_at(self.current_time);
        self.values.iter().map(|v| v * s).collect()
    }

    /// Stored values and the factor turning them into current values.
    pub fn raw(&self) -> (&[f64], f64) {
        (&self.values, self.scale_at(self.current_time))
    }

    pub fn is_synchronized(&self) -> bool {
        self.epoch == self.current_time
    }

    /// Fold pending growth into the stored values.
    pub fn synchronize(&mut self) -> Result<()> {
        self.move_epoch(self.current_time)
    }

    #[cold]
    #[inline(never)]
    fn move_epoch(&mut self, t: f64) -> Result<()> {
        let s = self.scale_at(t);
        for (x, v) in self.values.iter_mut().enumerate() {
            let w = *v * s;
            if w > OVERFLOW_LIMIT {
                return Err(Error::Overflow { site: x, value: w, time: t });
            }
            *v = if w < UNDERFLOW_LIMIT { 0.0 } else { w };
        }
        self.epoch = t;
        Ok(())
    }

    #[inline]
    fn advance_clock(&mut self, t: f64) -> Result<()> {
        self.current_time = t;
        if (self.growth_rate * (t - self.epoch)).abs() > MAX_LOG_DRIFT {
            self.move_epoch(t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Recovery,
    /// `eta(x) <- eta(x) + eta(x + dir)`.
    Infection(Direction),
}

/// One applied event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Microscopic time.
    pub time: f64,
    pub site: usize,
    pub kind: EventKind,
    /// Stored value of `site` just before and just after the event;
    /// see [`EventRecord::eta_factor`].
    pub before: f64,
    pub after: f64,
    /// Configuration epoch when the event was applied.
    pub epoch: f64,
}

impl EventRecord {
    /// Factor turning the stored values into `eta`.
    pub fn eta_factor(&self, growth_rate: f64) -> f64 {
        (growth_rate * (self.time - self.epoch)).exp()
    }
}

/// Raw random draws for one event, before anything is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EventDraw {
    pub dt: f64,
    pub site: usize,
    pub kind: EventKind,
}

/// Immutable dynamics: parameters, geometry and rates.
#[derive(Debug, Clone)]
pub struct Process {
    params: ModelParams,
    torus: Torus,
    neighbors: Vec<u32>,
    total_rate: f64,
    site_rate: f64,
    rate_plus: f64,
    axis_rate: f64,
}

impl Process {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let torus = Torus::new(params.d, params.side);
        let neighbors = torus.neighbor_table();
        let site_rate = params.site_rate();
        Ok(Self {
            total_rate: total_event_rate(&params),
            site_rate,
            rate_plus: params.rate_from_plus(),
            axis_rate: params.rate_from_plus() + params.rate_from_minus(),
            torus,
            neighbors,
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    #[inline]
    pub fn neighbor(&self, x: usize, dir: Direction) -> usize {
        self.neighbors[2 * self.params.d * x + dir.index()] as usize
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// Draw an i.i.d. initial configuration at time zero.
    pub fn init_config<R: Rng + ?Sized>(&self, law: &InitialLaw, rng: &mut R) -> Result<Configuration> {
        law.validate(self.params.d)?;
        let sampler = law.marginal().sampler();
        let n = self.params.n_f64();
        let period = self.params.period();
        let values = (0..self.torus.len())
            .map(|x| {
                let xi = sampler.sample(rng);
                match law {
                    InitialLaw::Iid { .. } => xi,
                    InitialLaw::Profile { shape, .. } => {
                        shape.value(&self.torus.position(x, n), period) * xi
                    }
                }
            })
            .collect();
        Ok(Configuration::from_values(values, self.params.growth_rate()))
    }

    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> EventDraw {
        let e: f64 = rng.sample(Exp1);
        let dt = e / self.total_rate;
        // One 53-bit uniform picks both the site and the event kind.
        let u = rng.random::<f64>() * self.total_rate;
        let site = ((u / self.site_rate) as usize).min(self.torus.len() - 1);
        let mut u = u - site as f64 * self.site_rate;
        let kind = if u < 1.0 {
            EventKind::Recovery
        } else {
            u -= 1.0;
            let axis = ((u / self.axis_rate) as usize).min(self.params.d - 1);
            let rem = u - axis as f64 * self.axis_rate;
            EventKind::Infection(Direction { axis, positive: rem < self.rate_plus })
        };
        EventDraw { dt, site, kind }
    }

    #[inline]
    pub(crate) fn apply(&self, cfg: &mut Configuration, t: f64, site: usize, kind: EventKind) -> Result<EventRecord> {
        cfg.advance_clock(t)?;
        let before = cfg.values[site];
        let after = match kind {
            EventKind::Recovery => 0.0,
            EventKind::Infection(dir) => {
                let sum = before + cfg.values[self.neighbor(site, dir)];
                if sum > cfg.overflow_guard {
                    let value = sum * cfg.scale_at(t);
                    if value > OVERFLOW_LIMIT {
                        return Err(Error::Overflow { site, value, time: t });
                    }
                }
                sum
            }
        };
        cfg.values[site] = after;
        Ok(EventRecord { time: t, site, kind, before, after, epoch: cfg.epoch })
    }

    /// Advance to the next event and apply it.
    pub fn step_event<R: Rng + ?Sized>(&self, cfg: &mut Configuration, rng: &mut R) -> Result<EventRecord> {
        let draw = self.draw(rng);
        let t = cfg.current_time + draw.dt;
        self.apply(cfg, t, draw.site, draw.kind)
    }

    /// Apply the next event if it occurs no later than the microscopic time
    /// `until`; otherwise move the clock to `until` and return `None`.
    /// The discarded waiting time is harmless by memorylessness.
    #[inline]
    pub fn next_event_before<R: Rng + ?Sized>(
        &self,
        cfg: &mut Configuration,
        until: f64,
        rng: &mut R,
    ) -> Result<Option<EventRecord>> {
        let draw = self.draw(rng);
        let t = cfg.current_time + draw.dt;
        if t > until {
            cfg.advance_clock(until)?;
            return Ok(None);
        }
        self.apply(cfg, t, draw.site, draw.kind).map(Some)
    }

    /// Simulate up to macroscopic time `t_macro` (microscopic `t_macro N^2`)
    /// and synchronise every site. Returns the number of events.
    pub fn run_until<R: Rng + ?Sized>(&self, cfg: &mut Configuration, t_macro: f64, rng: &mut R) -> Result<u64> {
        let until = self.params.micro_time(t_macro);
        self.run_until_micro(cfg, until, rng)
    }

    pub fn run_until_micro<R: Rng + ?Sized>(&self, cfg: &mut Configuration, until: f64, rng: &mut R) -> Result<u64> {
        if until < cfg.current_time {
            return Err(Error::TimeReversal { target: until, current: cfg.current_time });
        }
        let mut events = 0;
        while self.next_event_before(cfg, until, rng)?.is_some() {
            events += 1;
        }
        cfg.synchronize()?;
        Ok(events)
    }
}

/// `L^d (1 + 2 lambda d)`.
pub fn total_event_rate(params: &ModelParams) -> f64 {
    params.n_sites() as f64 * params.site_rate()
}

/// Spatial moments of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMoments {
    pub mean: f64,
    pub second: f64,
    pub fourth: f64,
    /// `(displacement, avg_x eta(x) eta(x + r) - mean^2)`.
    pub covariances: Vec<(Vec<i64>, f64)>,
}

pub fn snapshot_moments(cfg: &Configuration, process: &Process, displacements: &[Vec<i64>]) -> SnapshotMoments {
    let values = cfg.current_values();
    let n = values.len() as f64;
    let (mut m1, mut m2, mut m4) = (0.0, 0.0, 0.0);
    for &v in &values {
        let v2 = v * v;
        m1 += v;
        m2 += v2;
        m4 += v2 * v2;
    }
    let mean = m1 / n;
    let torus = process.torus();
    let covariances = displacements
        .iter()
        .map(|r| {
            let side = torus.side() as i64;
            let sum: f64 = (0..values.len())
                .map(|x| {
                    let mut y = 0usize;
                    let mut stride = 1usize;
                    for (axis, dr) in r.iter().enumerate() {
                        let c = (torus.coord(x, axis) as i64 + dr).rem_euclid(side) as usize;
                        y += c * stride;
                        stride *= torus.side();
                    }
                    values[x] * values[y]
                })
                .sum();
            (r.clone(), sum / n - mean * mean)
        })
        .collect();
    SnapshotMoments { mean, second: m2 / n, fourth: m4 / n, covariances }
}
