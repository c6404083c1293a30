//! Follow the fluctuation field along paths: martingale, quadratic
//! variation and the Ornstein-Uhlenbeck variance it should approach.

use contact_path::fluct::{field_scale, ou_variance, run_tracked, FieldTracker};
use contact_path::lattice::{self, ModelParams};
use contact_path::process::{InitialLaw, Process};
use contact_path::rng::replica_rng;
use contact_path::stats::Moments;
use contact_path::test_function::TestFunction;

fn main() -> contact_path::Result<()> {
    let params = ModelParams::symmetric(3, 2.0, 6, 24, 0.2)?;
    let process = Process::new(params.clone())?;
    let consts = lattice::constants(&params)?;
    let h = TestFunction::gaussian(vec![2.0; 3], 0.5, params.period());
    let ts = [0.1, 0.2];
    println!("field scale {:.4}", field_scale(&params));

    let mut y = vec![Moments::new(); ts.len()];
    let mut m = vec![Moments::new(); ts.len()];
    for r in 0..40 {
        let mut rng = replica_rng(17, r);
        let mut cfg = process.init_config(&InitialLaw::constant_one(), &mut rng)?;
        let mut tracker = FieldTracker::new(&process, std::slice::from_ref(&h), 1.0, &cfg);
        for (i, &t) in ts.iter().enumerate() {
            run_tracked(&process, &mut cfg, &mut tracker, t, &mut rng)?;
            let v = &tracker.sample(t).values[0];
            y[i].push(v.y);
            m[i].push(v.martingale);
        }
    }
    for (i, &t) in ts.iter().enumerate() {
        println!(
            "t={t} Var Y={:.4} (OU {:.4}) mean M={:.4}+/-{:.4}",
            y[i].variance(),
            ou_variance(&h, params.lambda, &consts, t, 16)?,
            m[i].mean,
            m[i].stderr()
        );
    }
    Ok(())
}
