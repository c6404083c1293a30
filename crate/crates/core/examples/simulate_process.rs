//! Run the process on a small torus and watch the empirical moments of one
//! configuration drift away from the initial law.

use contact_path::lattice::ModelParams;
use contact_path::process::{snapshot_moments, InitialLaw, Marginal, Process};
use contact_path::rng::replica_rng;

fn main() -> contact_path::Result<()> {
    let params = ModelParams::symmetric(3, 2.0, 8, 32, 0.5)?;
    let process = Process::new(params.clone())?;
    let mut rng = replica_rng(11, 0);
    let mut cfg = process.init_config(&InitialLaw::iid(Marginal::two_point()), &mut rng)?;
    let shifts = vec![vec![1, 0, 0], vec![4, 0, 0]];

    let mut events = 0;
    for t in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        events += process.run_until(&mut cfg, t, &mut rng)?;
        let m = snapshot_moments(&cfg, &process, &shifts);
        println!(
            "t={t:.1} micro={:>5.1} mean={:.4} second={:.4} fourth={:>8.3} cov(e1)={:.4} events={events}",
            params.micro_time(t),
            m.mean,
            m.second,
            m.fourth,
            m.covariances[0].1
        );
    }
    Ok(())
}
