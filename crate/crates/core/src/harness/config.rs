use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::ModelParams;
use crate::process::InitialLaw;
use crate::test_function::TestFunction;

/// Which module an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Hydro,
    Fluct,
    Moments,
    Gamma,
    Report,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Hydro => "hydro",
            ExperimentKind::Fluct => "fluct",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Gamma => "gamma",
            ExperimentKind::Report => "report",
        }
    }
}

/// Walk-based moment computation selected by `[moments] what`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentsWhat {
    /// Exact second moment against its limit, plus the beta-walk product.
    Second,
    /// Poissonized fourth moment, with the enumeration oracle at small times.
    Fourth,
    /// Horizon stability of the fourth-moment product bound.
    Product,
    /// `Cov(eta(O)^2, eta(y)^2)` at several separations.
    Cov,
    /// The dominating five-state chain.
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSection {
    pub what: MomentsWhat,
    /// Monte Carlo walks per estimate.
    #[serde(default = "default_walks")]
    pub walks: usize,
    /// Step cap for the product bound and the beta walk.
    #[serde(default = "default_walk_horizon")]
    pub horizon: u64,
    /// Separations along the first axis for `cov`.
    #[serde(default = "default_separations")]
    pub separations: Vec<i64>,
    /// `(C1, d)` pairs for `chain`.
    #[serde(default = "default_chain_pairs")]
    pub chain: Vec<(f64, usize)>,
    /// Dimension and largest `n` of the tail check for `chain`.
    #[serde(default = "default_tail_d")]
    pub tail_d: usize,
    #[serde(default = "default_tail_n")]
    pub tail_n: usize,
}

impl MomentsSection {
    pub fn new(what: MomentsWhat) -> Self {
        Self {
            what,
            walks: default_walks(),
            horizon: default_walk_horizon(),
            separations: default_separations(),
            chain: default_chain_pairs(),
            tail_d: default_tail_d(),
            tail_n: default_tail_n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    #[serde(default = "default_walks")]
    pub walks: usize,
    #[serde(default = "default_gamma_horizon")]
    pub horizon: u64,
}

impl Default for GammaSection {
    fn default() -> Self {
        Self { walks: default_walks(), horizon: default_gamma_horizon() }
    }
}

fn default_walks() -> usize {
    100_000
}
fn default_walk_horizon() -> u64 {
    10_000
}
fn default_gamma_horizon() -> u64 {
    100_000
}
fn default_separations() -> Vec<i64> {
    vec![2, 4, 8, 16]
}
fn default_chain_pairs() -> Vec<(f64, usize)> {
    vec![(1.5, 100), (2.0, 400)]
}
fn default_tail_d() -> usize {
    400
}
fn default_tail_n() -> usize {
    16
}
fn default_replicas() -> usize {
    1
}
fn default_law() -> InitialLaw {
    InitialLaw::constant_one()
}
fn is_constant_one(law: &InitialLaw) -> bool {
    *law == InitialLaw::constant_one()
}

/// A complete experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Worker threads; the machine default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Output directory for `raw.jsonl`, `report.json` and CSV tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Observation times in macroscopic units; `[params.horizon]` when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<f64>,
    /// Lattice displacements at which `simulate` records covariances.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub displacements: Vec<Vec<i64>>,
    /// Reports pooled by `report`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default = "default_law", skip_serializing_if = "is_constant_one")]
    pub law: InitialLaw,
    /// Test functions for `hydro` and `fluct`; defaults chosen from the
    /// period when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSection>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, params: Option<ModelParams>) -> Self {
        Self {
            kind,
            seed: 0,
            replicas: 1,
            threads: None,
            out: None,
            checkpoints: Vec::new(),
            displacements: Vec::new(),
            inputs: Vec::new(),
            params,
            law: InitialLaw::constant_one(),
            tests: Vec::new(),
            moments: None,
            gamma: None,
        }
    }

    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<&ModelParams> {
        self.params
            .as_ref()
            .ok_or_else(|| Error::InvalidParams(vec![format!("kind {} needs a [params] table", self.kind.name())]))
    }

    /// The checkpoints, or the horizon alone.
    pub fn times(&self) -> Vec<f64> {
        match (&self.params, self.checkpoints.is_empty()) {
            (Some(p), true) => vec![p.horizon],
            _ => self.checkpoints.clone(),
        }
    }

    /// Test functions, or a centred Gaussian, a low cosine mode and the
    /// constant when none are given.
    pub fn test_functions(&self) -> Vec<TestFunction> {
        if !self.tests.is_empty() {
            return self.tests.clone();
        }
        let Some(p) = &self.params else { return Vec::new() };
        let period = p.period();
        let mut mode = vec![0; p.d];
        mode[0] = 1;
        vec![
            TestFunction::gaussian(vec![0.5 * period; p.d], period / 8.0, period),
            TestFunction::cosine(mode, period),
            TestFunction::Constant { value: 1.0, period, d: p.d },
        ]
    }

    /// Every violated constraint, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::InvalidParams(v) => errs.extend(v),
                    other => errs.push(other.to_string()),
                }
            }
        };
        if self.replicas == 0 {
            push(Err(Error::InvalidParams(vec!["replicas must be positive".into()])));
        }
        if self.threads == Some(0) {
            push(Err(Error::InvalidParams(vec!["threads must be positive".into()])));
        }
        let needs_params = !matches!(
            (self.kind, &self.moments),
            (ExperimentKind::Report, _) | (ExperimentKind::Moments, Some(MomentsSection { what: MomentsWhat::Chain, .. }))
        );
        match &self.params {
            Some(p) => {
                push(p.validate());
                push(self.law.validate(p.d));
                for (i, t) in self.tests.iter().enumerate() {
                    push(t.validate());
                    if t.d() != p.d {
                        push(Err(Error::InvalidParams(vec![format!("test {i} has dimension {}, expected {}", t.d(), p.d)])));
                    }
                    if (t.period() - p.period()).abs() > 1e-12 * p.period() {
                        push(Err(Error::InvalidParams(vec![format!(
                            "test {i} has period {}, the torus has {}",
                            t.period(),
                            p.period()
                        )])));
                    }
                }
                for (i, r) in self.displacements.iter().enumerate() {
                    if r.len() != p.d {
                        push(Err(Error::InvalidParams(vec![format!("displacement {i} has {} components", r.len())])));
                    }
                }
            }
            None if needs_params => push(self.params().map(|_| ())),
            None => {}
        }
        let ts = &self.checkpoints;
        if ts.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || ts.windows(2).any(|w| w[1] <= w[0]) {
            push(Err(Error::InvalidParams(vec!["checkpoints must be finite, nonnegative and increasing".into()])));
        }
        match self.kind {
            ExperimentKind::Moments => match &self.moments {
                None => push(Err(Error::InvalidParams(vec!["kind moments needs a [moments] table".into()]))),
                Some(m) => {
                    if m.walks == 0 {
                        push(Err(Error::InvalidParams(vec!["moments.walks must be positive".into()])));
                    }
                    if m.what == MomentsWhat::Cov && m.separations.iter().any(|s| *s <= 0) {
                        push(Err(Error::InvalidParams(vec!["separations must be positive".into()])));
                    }
                }
            },
            ExperimentKind::Fluct => {
                if let Some(p) = &self.params {
                    if !self.law.is_mean_one_iid() {
                        push(Err(Error::InvalidParams(vec!["fluct needs an i.i.d. mean-one initial law".into()])));
                    }
                    if p.lambda2 != 0.0 {
                        push(Err(Error::InvalidParams(vec![
                            "fluct centres at a constant mean and needs lambda2 = 0; rescale paths by exp(lambda2 t) instead"
                                .into(),
                        ])));
                    }
                }
            }
            ExperimentKind::Report => {
                if self.inputs.is_empty() {
                    push(Err(Error::InvalidParams(vec!["kind report needs at least one input".into()])));
                }
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// SHA-256 of the configuration with the seed, thread count and output
    /// path cleared: reports sharing it differ only by seed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.threads = None;
        c.out = None;
        let json = serde_json::to_string(&c).expect("configs serialize");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{DensityShape, Marginal};

    fn full() -> ExperimentConfig {
        let p = ModelParams::new(3, 2.0, 0.5, 0.0, 6, 24, 0.3).unwrap();
        let mut c = ExperimentConfig::new(ExperimentKind::Hydro, Some(p.clone()));
        c.seed = 17;
        c.replicas = 4;
        c.threads = Some(2);
        c.out = Some("runs/a".into());
        c.checkpoints = vec![0.1, 0.3];
        c.law = InitialLaw::Profile {
            shape: DensityShape::Bump { level: 0.5, amplitude: 1.0, center: vec![2.0; 3], width: 0.5 },
            marginal: Marginal::TwoPoint { low: 0.0, high: 2.0 },
        };
        c.tests = c.test_functions();
        c.moments = Some(MomentsSection::new(MomentsWhat::Cov));
        c.gamma = Some(GammaSection::default());
        c.displacements = vec![vec![1, 0, 0]];
        c
    }

    #[test]
    fn round_trips_through_toml() {
        let c = full();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
        let minimal = ExperimentConfig::new(ExperimentKind::Gamma, c.params.clone());
        let text = minimal.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), minimal);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "kind = \"gamma\"\nsed = 3\n[params]\nd = 3\nlambda = 2.0\nn = 4\nside = 16\nhorizon = 1.0\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
        let text = "kind = \"gamma\"\n[params]\nd = 3\nlambda = 2.0\nn = 4\nside = 16\nhorizon = 1.0\nmu = 1\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "kind = \"fluct\"\nreplicas = 0\ncheckpoints = [0.2, 0.1]\n[params]\nd = 3\nlambda = 2.0\nlambda1 = 0.5\nlambda2 = 1.0\nn = 0\nside = 16\nhorizon = 1.0\n";
        let Err(Error::InvalidParams(v)) = ExperimentConfig::from_toml_str(text) else { panic!() };
        assert!(v.len() >= 4, "{v:?}");
        assert!(v.iter().any(|m| m.contains("replicas")));
        assert!(v.iter().any(|m| m.contains("checkpoints")));
        assert!(v.iter().any(|m| m.contains("lambda2")));
    }

    #[test]
    fn hash_ignores_seed_threads_and_output() {
        let a = full();
        let mut b = a.clone();
        b.seed = 99;
        b.threads = None;
        b.out = None;
        assert_eq!(a.hash(), b.hash());
        b.params.as_mut().unwrap().lambda = 2.5;
        assert_ne!(a.hash(), b.hash());
    }
}
