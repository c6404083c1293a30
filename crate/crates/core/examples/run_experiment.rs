//! Drive the harness from a TOML config, write the outputs and pool two
//! seeds into one report.

use contact_path::harness::{pool_reports, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
kind = "simulate"
seed = 1
replicas = 8
checkpoints = [0.0, 0.1, 0.2]

[params]
d = 3
lambda = 2.0
n = 6
side = 24
horizon = 0.2
"#;

fn main() -> contact_path::Result<()> {
    let dir = std::env::temp_dir().join("contact-path-example");
    let mut reports = Vec::new();
    for seed in [1, 2] {
        let mut config = ExperimentConfig::from_toml_str(CONFIG)?;
        config.seed = seed;
        config.out = Some(dir.join(format!("seed{seed}")));
        reports.push(run_experiment(&config)?);
    }
    println!("config hash {}", reports[0].config_hash);

    let pooled = pool_reports(&reports)?;
    for row in &pooled.rows {
        println!("{}", row.summary());
    }
    println!("pooled: {}", if pooled.pass { "PASS" } else { "FAIL" });
    println!("outputs under {}", dir.display());
    Ok(())
}
