//! Escape probability, Green function and the derived constants for a few
//! dimensions, with a Monte Carlo check of the escape probability.

use contact_path::lattice::{self, constants_for, estimate_gamma_d, GreenFunction};

fn main() -> contact_path::Result<()> {
    println!("{:>3} {:>12} {:>12} {:>12} {:>10}", "d", "gamma_d", "G(0)", "threshold", "h(lambda=2)");
    for d in [3, 4, 5, 8, 12] {
        let gamma = lattice::gamma_d(d)?;
        let green = GreenFunction::new(d)?;
        let c = constants_for(d, 2.0, gamma);
        println!(
            "{d:>3} {gamma:>12.8} {:>12.8} {:>12.6} {:>10.5}",
            green.at_origin(),
            c.lambda_threshold,
            c.h_lambda
        );
    }

    let green = GreenFunction::new(3)?;
    for x in [vec![1, 0, 0], vec![2, 1, 0], vec![5, 5, 5]] {
        println!("d=3 hitting probability of {x:?}: {:.6}", green.hitting_probability(&x));
    }

    // The walk estimate is truncated at a finite horizon, so it is biased low.
    let est = estimate_gamma_d(3, 20_000, 10_000, 7)?;
    println!(
        "d=3 escape by simulation: {:.4} +/- {:.4} (bias <= {:.4}), exact {:.6}",
        est.mean,
        est.stderr,
        est.bias_bound,
        lattice::gamma_d(3)?
    );
    Ok(())
}
