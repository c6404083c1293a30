//! Experiment orchestration: TOML configs, replica farming, reports and
//! raw JSON-lines output.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, ExperimentKind, GammaSection, MomentsSection, MomentsWhat};
pub use report::{aggregate_reports, pool_reports, Bound, ReportRow, RunMetadata, RunReport};
pub use run::{execute, run_experiment, throughput_benchmark, write_outputs, RunOutput, Throughput, RELAXED_MICRO_TIME};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ModelParams;
    use crate::process::{InitialLaw, Marginal};

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind, Some(ModelParams::symmetric(3, 2.0, 2, 8, 0.2).unwrap()));
        c.seed = 5;
        c.replicas = 6;
        c.checkpoints = vec![0.0, 0.1, 0.2];
        c
    }

    #[test]
    fn simulate_at_time_zero_reproduces_the_initial_law() {
        let mut c = small(ExperimentKind::Simulate);
        c.checkpoints = vec![0.0];
        c.law = InitialLaw::iid(Marginal::GammaMeanOne { shape: 2.0 });
        c.replicas = 40;
        let out = execute(&c).unwrap();
        for name in ["mean t=0", "second t=0", "fourth t=0"] {
            let row = out.report.row(name).unwrap();
            assert!(row.enforced && row.pass, "{row:?}");
        }
        c.law = InitialLaw::constant_one();
        let out = execute(&c).unwrap();
        let row = out.report.row("fourth t=0").unwrap();
        assert_eq!((row.measured, row.stderr), (1.0, 0.0));
    }

    #[test]
    fn raw_data_is_identical_across_runs_and_thread_counts() {
        for kind in [ExperimentKind::Simulate, ExperimentKind::Hydro, ExperimentKind::Fluct] {
            let mut c = small(kind);
            c.threads = Some(1);
            let a = execute(&c).unwrap();
            c.threads = Some(3);
            let b = execute(&c).unwrap();
            assert_eq!(a.raw, b.raw, "{kind:?}");
            assert_eq!(a.tables, b.tables);
            assert_eq!(a.report.rows, b.report.rows);
            assert!(a.raw.len() > 1);
            assert!(a.raw[0].contains(&c.hash()));
        }
    }

    #[test]
    fn files_are_written_and_reports_pool() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for seed in 0..3 {
            let mut c = small(ExperimentKind::Hydro);
            c.seed = seed;
            c.out = Some(dir.path().join(format!("s{seed}")));
            run_experiment(&c).unwrap();
            let out = c.out.unwrap();
            for f in ["raw.jsonl", "report.json", "hydro.csv"] {
                assert!(out.join(f).exists(), "{f}");
            }
            let first = std::fs::read_to_string(out.join("raw.jsonl")).unwrap();
            run_experiment(&{
                let mut c2 = small(ExperimentKind::Hydro);
                c2.seed = seed;
                c2.out = Some(dir.path().join("again"));
                c2
            })
            .unwrap();
            assert_eq!(first, std::fs::read_to_string(dir.path().join("again/raw.jsonl")).unwrap());
            paths.push(out.join("report.json"));
        }
        let pooled = aggregate_reports(&paths).unwrap();
        let single = aggregate_reports(&paths[..1]).unwrap();
        let r0 = RunReport::load(&paths[0]).unwrap();
        assert_eq!(single.rows, r0.rows);
        let name = "pairing t=0.2 G2";
        assert_eq!(pooled.row(name).unwrap().n, 18);
        assert!(pooled.row(name).unwrap().stderr < r0.row(name).unwrap().stderr);
    }

    #[test]
    fn gamma_compares_monte_carlo_with_the_green_function() {
        let mut c = ExperimentConfig::new(ExperimentKind::Gamma, Some(ModelParams::symmetric(3, 2.0, 2, 8, 0.2).unwrap()));
        c.gamma = Some(GammaSection { walks: 20_000, horizon: 20_000 });
        let out = execute(&c).unwrap();
        let row = out.report.row("gamma d=3").unwrap();
        assert!((row.predicted.unwrap() - 0.6595).abs() < 1e-3);
        assert!(out.report.pass, "{row:?}");
    }

    #[test]
    fn chain_moments_need_no_params() {
        let mut c = ExperimentConfig::new(ExperimentKind::Moments, None);
        c.moments = Some(MomentsSection::new(MomentsWhat::Chain));
        let out = execute(&c).unwrap();
        assert!(out.report.row("chain C1=1.5 d=100").unwrap().pass);
        assert_eq!(out.report.rows.len(), 2 + 17);
    }

    #[test]
    fn failed_replicas_keep_their_raw_data() {
        let mut c = small(ExperimentKind::Simulate);
        let mut p = c.params.clone().unwrap();
        p.lambda2 = 4000.0;
        c.params = Some(p);
        c.checkpoints = vec![0.0, 0.01, 1.0];
        c.replicas = 2;
        let out = execute(&c).unwrap();
        assert_eq!(out.report.metadata.failed_replicas, 2);
        assert!(!out.report.pass);
        assert!(out.raw.iter().any(|l| l.contains("\"error\"")));
        assert!(out.raw.iter().filter(|l| l.contains("snapshot")).count() >= 4);
    }

    #[test]
    fn shipped_configs_parse_and_validate() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let config = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= 5);
    }
}
