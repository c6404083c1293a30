use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::stats::pool;

/// JSON has no infinities or NaN; store them as strings.
mod lenient {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// How `measured` is compared with `predicted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// `|measured - predicted| <= tolerance`.
    #[default]
    TwoSided,
    /// `measured <= predicted + tolerance`.
    Upper,
}

/// One checked (or merely reported) quantity.
///
/// `tolerance = abs_tol + rel_tol |predicted| + sigmas stderr`, so the
/// verdict can be recomputed from the stored numbers alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    #[serde(with = "lenient::option")]
    pub predicted: Option<f64>,
    #[serde(with = "lenient")]
    pub measured: f64,
    #[serde(with = "lenient")]
    pub stderr: f64,
    pub n: u64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sigmas: f64,
    #[serde(default)]
    pub bound: Bound,
    #[serde(with = "lenient")]
    pub tolerance: f64,
    /// Whether the row counts towards the run's verdict.
    pub enforced: bool,
    pub pass: bool,
}

impl ReportRow {
    /// An informational row with no prediction.
    pub fn info(name: impl Into<String>, measured: f64, stderr: f64, n: u64) -> Self {
        Self {
            name: name.into(),
            predicted: None,
            measured,
            stderr,
            n,
            rel_tol: 0.0,
            abs_tol: 0.0,
            sigmas: 0.0,
            bound: Bound::TwoSided,
            tolerance: 0.0,
            enforced: false,
            pass: true,
        }
    }

    /// An enforced comparison; adjust with the builder methods.
    pub fn check(name: impl Into<String>, predicted: f64, measured: f64, stderr: f64, n: u64) -> Self {
        let mut r = Self::info(name, measured, stderr, n);
        r.predicted = Some(predicted);
        r.enforced = true;
        r.evaluate();
        r
    }

    pub fn rel(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.evaluate();
        self
    }

    pub fn abs(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.evaluate();
        self
    }

    pub fn sigmas(mut self, k: f64) -> Self {
        self.sigmas = k;
        self.evaluate();
        self
    }

    pub fn upper(mut self) -> Self {
        self.bound = Bound::Upper;
        self.evaluate();
        self
    }

    pub fn enforced(mut self, on: bool) -> Self {
        self.enforced = on;
        self
    }

    /// Recompute `tolerance` and `pass`.
    pub fn evaluate(&mut self) {
        let Some(p) = self.predicted else {
            self.tolerance = 0.0;
            self.pass = true;
            return;
        };
        let se = if self.sigmas == 0.0 { 0.0 } else { self.sigmas * self.stderr };
        self.tolerance = self.abs_tol + self.rel_tol * p.abs() + se;
        self.pass = match self.bound {
            Bound::TwoSided => (self.measured - p).abs() <= self.tolerance,
            Bound::Upper => self.measured <= p + self.tolerance,
        };
    }

    /// One line for terminals: `PASS name measured vs predicted`.
    pub fn summary(&self) -> String {
        let verdict = match (self.enforced, self.pass) {
            (false, _) => "info",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let cmp = match (self.predicted, self.bound) {
            (None, _) => String::new(),
            (Some(p), Bound::TwoSided) => format!(" vs {p:.6} (tol {:.3e})", self.tolerance),
            (Some(p), Bound::Upper) => format!(" <= {p:.6} + {:.3e}", self.tolerance),
        };
        format!("{verdict:4} {:40} {:.6} +- {:.2e}{cmp}", self.name, self.measured, self.stderr)
    }
}

/// Environment and bookkeeping for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_seconds: f64,
    pub events: u64,
    pub events_per_second: f64,
    /// Failed replicas; their partial records remain in the raw data.
    pub failed_replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub metadata: RunMetadata,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, rows: Vec<ReportRow>, metadata: RunMetadata, warnings: Vec<String>) -> Self {
        let mut r = Self {
            kind: config.kind,
            config_hash: config.hash(),
            config: config.clone(),
            rows,
            metadata,
            warnings,
            pass: false,
        };
        r.reevaluate();
        r
    }

    /// Recompute every row and the overall verdict from stored numbers.
    pub fn reevaluate(&mut self) {
        self.rows.iter_mut().for_each(ReportRow::evaluate);
        self.pass = self.metadata.failed_replicas == 0 && self.rows.iter().all(|r| !r.enforced || r.pass);
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Pool reports of the same configuration run under different seeds:
/// count-weighted means and standard errors, tolerances re-evaluated.
pub fn aggregate_reports<P: AsRef<Path>>(paths: &[P]) -> Result<RunReport> {
    let reports = paths.iter().map(|p| RunReport::load(p.as_ref())).collect::<Result<Vec<_>>>()?;
    pool_reports(&reports)
}

pub fn pool_reports(reports: &[RunReport]) -> Result<RunReport> {
    let first = reports.first().ok_or_else(|| Error::ReportMismatch("no reports given".into()))?;
    if reports.len() == 1 {
        let mut out = first.clone();
        out.reevaluate();
        return Ok(out);
    }
    for r in &reports[1..] {
        if r.config_hash != first.config_hash {
            return Err(Error::ReportMismatch(format!(
                "config {} differs from {} beyond the seed",
                &r.config_hash[..12],
                &first.config_hash[..12]
            )));
        }
        let names = |x: &RunReport| x.rows.iter().map(|r| r.name.clone()).collect::<Vec<_>>();
        if names(r) != names(first) {
            return Err(Error::ReportMismatch("row sets differ".into()));
        }
    }
    let mut seeds: Vec<u64> = reports.iter().flat_map(|r| r.metadata.seeds.iter().copied()).collect();
    seeds.sort_unstable();
    if seeds.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::ReportMismatch("the same seed appears twice; its samples would be counted twice".into()));
    }
    let rows = (0..first.rows.len())
        .map(|i| {
            let parts: Vec<(f64, f64, u64)> =
                reports.iter().map(|r| (r.rows[i].measured, r.rows[i].stderr, r.rows[i].n.max(1))).collect();
            let (measured, stderr, n) = pool(&parts);
            let mut row = first.rows[i].clone();
            row.measured = measured;
            row.stderr = stderr;
            row.n = n;
            row.evaluate();
            row
        })
        .collect();
    let wall: f64 = reports.iter().map(|r| r.metadata.wall_seconds).sum();
    let events: u64 = reports.iter().map(|r| r.metadata.events).sum();
    let metadata = RunMetadata {
        version: first.metadata.version.clone(),
        seeds,
        threads: first.metadata.threads,
        wall_seconds: wall,
        events,
        events_per_second: if wall > 0.0 { events as f64 / wall } else { 0.0 },
        failed_replicas: reports.iter().map(|r| r.metadata.failed_replicas).sum(),
    };
    let mut warnings: Vec<String> = reports.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    warnings.dedup();
    let mut out = first.clone();
    out.rows = rows;
    out.metadata = metadata;
    out.warnings = warnings;
    out.reevaluate();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ModelParams;

    fn report(seed: u64, lambda: f64, mean: f64, se: f64) -> RunReport {
        let mut c = ExperimentConfig::new(ExperimentKind::Gamma, Some(ModelParams::symmetric(3, lambda, 4, 16, 1.0).unwrap()));
        c.seed = seed;
        let rows = vec![
            ReportRow::check("x", 1.0, mean, se, 100).sigmas(3.0),
            ReportRow::check("inf", 1.0, f64::INFINITY, 0.0, 1).upper().enforced(false),
        ];
        let meta = RunMetadata {
            version: "0".into(),
            seeds: vec![seed],
            threads: 1,
            wall_seconds: 1.0,
            events: 10,
            events_per_second: 10.0,
            failed_replicas: 0,
        };
        RunReport::new(&c, rows, meta, vec![])
    }

    #[test]
    fn verdicts_follow_the_stored_numbers() {
        let r = ReportRow::check("a", 1.0, 1.25, 0.1, 10).sigmas(2.0).rel(0.1);
        assert!((r.tolerance - 0.3).abs() < 1e-15);
        assert!(r.pass);
        assert!(!ReportRow::check("b", 1.0, 1.5, 0.1, 10).sigmas(2.0).pass);
        assert!(ReportRow::check("c", 1.0, -7.0, 0.0, 1).upper().pass);
        assert!(!ReportRow::check("d", 1.0, f64::NAN, 0.0, 1).pass);
    }

    #[test]
    fn json_round_trip_keeps_infinities() {
        let r = report(1, 2.0, 1.0, 0.1);
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.rows[0], r.rows[0]);
        assert!(back.rows[1].measured.is_infinite());
    }

    #[test]
    fn pooling_one_report_is_identity() {
        let r = report(1, 2.0, 1.1, 0.05);
        let p = pool_reports(std::slice::from_ref(&r)).unwrap();
        assert_eq!(p.rows[0], r.rows[0]);
    }

    #[test]
    fn pooling_shrinks_the_stderr() {
        let rs: Vec<_> = (0..4).map(|s| report(s, 2.0, 1.45, 0.2)).collect();
        let p = pool_reports(&rs).unwrap();
        assert!((p.rows[0].stderr - 0.1).abs() < 1e-12);
        assert!((p.rows[0].measured - 1.45).abs() < 1e-12);
        assert!(!p.rows[0].pass);
        assert!(rs[0].rows[0].pass);
        assert_eq!(p.metadata.seeds, vec![0, 1, 2, 3]);
    }

    #[test]
    fn mismatched_configs_are_refused() {
        let rs = [report(1, 2.0, 1.0, 0.1), report(2, 2.5, 1.0, 0.1)];
        assert!(matches!(pool_reports(&rs), Err(Error::ReportMismatch(_))));
        let rs = [report(1, 2.0, 1.0, 0.1), report(1, 2.0, 1.0, 0.1)];
        assert!(matches!(pool_reports(&rs), Err(Error::ReportMismatch(_))));
    }
}
