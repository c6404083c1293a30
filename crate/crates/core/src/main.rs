use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use contact_path::harness::{run_experiment, ExperimentConfig, ExperimentKind, MomentsSection, MomentsWhat};
use contact_path::lattice::ModelParams;
use contact_path::process::{DensityShape, InitialLaw, Marginal};
use contact_path::test_function::TestFunction;
use contact_path::Result;

/// Experiments on the weakly asymmetric normalized binary contact path
/// process. Exit status: 0 when every enforced check passes, 1 when one
/// fails, 2 on errors.
#[derive(Parser)]
#[command(name = "contact-path", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for raw.jsonl, report.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Clone, Default)]
struct Model {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda2: Option<f64>,
    /// Scaling parameter N.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Torus side L in lattice units.
    #[arg(long = "L")]
    side: Option<usize>,
    /// Macroscopic horizon T.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Comma-separated macroscopic observation times.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<f64>>,
    /// Single-site initial law.
    #[arg(long, value_enum)]
    init: Option<Init>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    ConstantOne,
    TwoPoint,
    Gamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Flat,
    Bump,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Gaussian,
    Cosine,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Second,
    Fourth,
    Product,
    Cov,
    Chain,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the particle system and record spatial moments.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
    },
    /// Compare empirical pairings with the hydrodynamic PDE.
    Hydro {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Macroscopic initial density.
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        /// Test functions, comma separated.
        #[arg(long = "H", value_enum, value_delimiter = ',')]
        tests: Option<Vec<TestKind>>,
    },
    /// Track the fluctuation field and its Dynkin martingale.
    Fluct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[arg(long = "H", value_enum, value_delimiter = ',')]
        tests: Option<Vec<TestKind>>,
    },
    /// Walk representations of the second and fourth moments.
    Moments {
        #[arg(value_enum)]
        what: What,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Monte Carlo walks per estimate.
        #[arg(long)]
        walks: Option<usize>,
        /// Step cap per walk.
        #[arg(long)]
        steps: Option<u64>,
        /// Separations for `cov`, comma separated.
        #[arg(long, value_delimiter = ',')]
        separations: Option<Vec<i64>>,
    },
    /// Escape probability by Monte Carlo against the Green function.
    Gamma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        walks: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Pool report.json files from runs that differ only by seed.
    Report {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Reference parameters: d = 3, lambda = 2, N = 10, L = 40, T = 0.3.
fn default_params() -> ModelParams {
    ModelParams { d: 3, lambda: 2.0, lambda1: 0.0, lambda2: 0.0, n: 10, side: 40, horizon: 0.3 }
}

fn base(kind: ExperimentKind, common: &Common, replicas: usize) -> Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.kind != kind {
                return Err(contact_path::Error::Config(format!(
                    "{} describes a {} experiment, not {}",
                    path.display(),
                    c.kind.name(),
                    kind.name()
                )));
            }
            c
        }
        None => {
            let mut c = ExperimentConfig::new(kind, Some(default_params()));
            c.replicas = replicas;
            c
        }
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(r) = common.replicas {
        c.replicas = r;
    }
    if common.threads.is_some() {
        c.threads = common.threads;
    }
    if common.out.is_some() {
        c.out = common.out.clone();
    }
    Ok(c)
}

fn apply_model(c: &mut ExperimentConfig, m: &Model) {
    let p = c.params.get_or_insert_with(default_params);
    if let Some(v) = m.d {
        p.d = v;
    }
    if let Some(v) = m.lambda {
        p.lambda = v;
    }
    if let Some(v) = m.lambda1 {
        p.lambda1 = v;
    }
    if let Some(v) = m.lambda2 {
        p.lambda2 = v;
    }
    if let Some(v) = m.n {
        p.n = v;
    }
    if let Some(v) = m.side {
        p.side = v;
    }
    if let Some(v) = m.horizon {
        p.horizon = v;
    }
    if let Some(ts) = &m.checkpoints {
        c.checkpoints = ts.clone();
    }
    if let Some(init) = m.init {
        let marginal = match init {
            Init::ConstantOne => Marginal::ConstantOne,
            Init::TwoPoint => Marginal::two_point(),
            Init::Gamma => Marginal::GammaMeanOne { shape: 2.0 },
        };
        c.law = match &c.law {
            InitialLaw::Profile { shape, .. } => InitialLaw::Profile { shape: shape.clone(), marginal },
            InitialLaw::Iid { .. } => InitialLaw::Iid { marginal },
        };
    }
}

fn apply_profile(c: &mut ExperimentConfig, profile: Profile) {
    let p = c.params.clone().unwrap_or_else(default_params);
    let period = p.period();
    let mut mode = vec![0; p.d];
    mode[0] = 1;
    let shape = match profile {
        Profile::Flat => DensityShape::Flat { level: 1.0 },
        Profile::Bump => DensityShape::Bump { level: 0.2, amplitude: 1.0, center: vec![0.5 * period; p.d], width: period / 8.0 },
        Profile::Cosine => DensityShape::Cosine { level: 1.0, amplitude: 0.5, mode },
    };
    c.law = InitialLaw::Profile { shape, marginal: c.law.marginal().clone() };
}

fn apply_tests(c: &mut ExperimentConfig, kinds: &[TestKind]) {
    let p = c.params.clone().unwrap_or_else(default_params);
    let period = p.period();
    let mut mode = vec![0; p.d];
    mode[0] = 1;
    c.tests = kinds
        .iter()
        .map(|k| match k {
            TestKind::Gaussian => TestFunction::gaussian(vec![0.5 * period; p.d], period / 8.0, period),
            TestKind::Cosine => TestFunction::cosine(mode.clone(), period),
            TestKind::Constant => TestFunction::Constant { value: 1.0, period, d: p.d },
        })
        .collect();
}

fn build(cmd: &Cmd) -> Result<(ExperimentConfig, bool)> {
    let (c, print) = match cmd {
        Cmd::Simulate { common, model } => {
            let mut c = base(ExperimentKind::Simulate, common, 10)?;
            apply_model(&mut c, model);
            (c, common.print_config)
        }
        Cmd::Hydro { common, model, profile, tests } => {
            let mut c = base(ExperimentKind::Hydro, common, 20)?;
            apply_model(&mut c, model);
            if common.config.is_none() && profile.is_none() {
                apply_profile(&mut c, Profile::Bump);
            }
            if let Some(p) = profile {
                apply_profile(&mut c, *p);
            }
            if let Some(t) = tests {
                apply_tests(&mut c, t);
            }
            (c, common.print_config)
        }
        Cmd::Fluct { common, model, tests } => {
            let mut c = base(ExperimentKind::Fluct, common, 20)?;
            apply_model(&mut c, model);
            if common.config.is_none() && model.checkpoints.is_none() {
                let t = c.params.as_ref().map_or(0.3, |p| p.horizon);
                c.checkpoints = vec![t / 3.0, 2.0 * t / 3.0, t];
            }
            if let Some(t) = tests {
                apply_tests(&mut c, t);
            }
            (c, common.print_config)
        }
        Cmd::Moments { what, common, model, walks, steps, separations } => {
            let mut c = base(ExperimentKind::Moments, common, 1)?;
            let what = match what {
                What::Second => MomentsWhat::Second,
                What::Fourth => MomentsWhat::Fourth,
                What::Product => MomentsWhat::Product,
                What::Cov => MomentsWhat::Cov,
                What::Chain => MomentsWhat::Chain,
            };
            let mut section = c.moments.take().filter(|m| m.what == what).unwrap_or_else(|| MomentsSection::new(what));
            if what == MomentsWhat::Chain && common.config.is_none() {
                c.params = None;
            } else {
                apply_model(&mut c, model);
            }
            if let Some(w) = walks {
                section.walks = *w;
            }
            if let Some(s) = steps {
                section.horizon = *s;
            }
            if let Some(s) = separations {
                section.separations = s.clone();
            }
            c.moments = Some(section);
            (c, common.print_config)
        }
        Cmd::Gamma { common, d, walks, steps } => {
            let mut c = base(ExperimentKind::Gamma, common, 1)?;
            if let Some(d) = d {
                c.params.get_or_insert_with(default_params).d = *d;
            }
            let mut g = c.gamma.take().unwrap_or_default();
            if let Some(w) = walks {
                g.walks = *w;
            }
            if let Some(s) = steps {
                g.horizon = *s;
            }
            c.gamma = Some(g);
            (c, common.print_config)
        }
        Cmd::Report { inputs, common } => {
            let mut c = match &common.config {
                Some(_) => base(ExperimentKind::Report, common, 1)?,
                None => {
                    let mut c = ExperimentConfig::new(ExperimentKind::Report, None);
                    c.out = common.out.clone();
                    c.threads = common.threads;
                    c
                }
            };
            if !inputs.is_empty() {
                c.inputs = inputs.clone();
            }
            (c, common.print_config)
        }
    };
    c.validate()?;
    Ok((c, print))
}

fn run(cli: &Cli) -> Result<bool> {
    let (config, print) = build(&cli.cmd)?;
    if print {
        print!("{}", config.to_toml_string()?);
        return Ok(true);
    }
    let report = run_experiment(&config)?;
    for row in &report.rows {
        println!("{}", row.summary());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let m = &report.metadata;
    println!(
        "{} rows, {} events in {:.2}s ({:.3e} events/s) on {} threads",
        report.rows.len(),
        m.events,
        m.wall_seconds,
        m.events_per_second,
        m.threads
    );
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
