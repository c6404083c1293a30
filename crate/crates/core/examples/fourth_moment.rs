//! Fourth moments through the typed walk on quadruples: the series at short
//! times, the poissonized walk, the product bound and pair covariances.

use contact_path::process::Marginal;
use contact_path::walks::{
    covariance_walk, fourth_moment_poissonized, fourth_moment_series, product_bound_estimate, InitialMoments, TypedPoint4,
};

fn main() -> contact_path::Result<()> {
    let (d, lambda) = (3, 2.0);
    let origin = TypedPoint4::diagonal(&[0, 0, 0]);
    let f0 = InitialMoments::from_marginal(&Marginal::two_point());

    // The enumeration grows like (30d)^steps, so keep t small and cut at three steps.
    for t in [0.001, 0.002, 0.004] {
        let series = fourth_moment_series(&origin, lambda, t, &f0, 3);
        let mc = fourth_moment_poissonized(d, lambda, t, &f0, 200_000, 1)?;
        println!("t={t:<5} series={series:.5} walk={:.5}+/-{:.5}", mc.mean, mc.stderr);
    }

    let bound = product_bound_estimate(&TypedPoint4::diagonal(&vec![0; 15]), 10.0, 5_000, 2_000, 2)?;
    for h in &bound.checkpoints {
        println!("d=15 product to {:>5} steps: {:.4}+/-{:.4}", h.horizon, h.mean, h.stderr);
    }
    println!("large-parameter regime: {}, alarm: {}", bound.large_parameter_regime, bound.divergence_alarm);

    let one = InitialMoments::constant_one();
    for s in [2, 4, 8] {
        let cov = covariance_walk(&[s, 0, 0], lambda, 2.0, &one, 20_000, 3)?;
        println!(
            "separation {s}: cov={:.5}+/-{:.5} meet={:.4}",
            cov.covariance.mean, cov.covariance.stderr, cov.meeting_probability
        );
    }
    Ok(())
}
