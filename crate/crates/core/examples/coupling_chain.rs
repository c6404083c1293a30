//! The five-state chain that dominates the type ladder: its expectation,
//! tail and a pathwise dominance check.

use contact_path::walks::{chain_tail, chain_tail_bound, coupling_chain_brute_force, coupling_chain_expectation, ladder_dominance};

fn main() -> contact_path::Result<()> {
    let d = 400;
    for c1 in [1.2, 1.5, 2.0] {
        let exact = coupling_chain_expectation(c1, d)?;
        let brute = coupling_chain_brute_force(c1, d, 1e-13, 100_000)?;
        println!("C1={c1} E={:.10} brute={brute:.10} radius={:.4}", exact.value, exact.spectral_radius);
    }

    let tail = chain_tail(d, 12)?;
    for (n, p) in tail.iter().enumerate().skip(1) {
        println!("P(tau > {n:>2}) = {p:.3e}  bound {:.3e}", chain_tail_bound(d, n));
    }

    let dom = ladder_dominance(8, 2_000, 1_000, 9)?;
    println!("dominance: {} of {} paths violated ({} completed)", dom.violations, dom.paths, dom.completed);
    Ok(())
}
