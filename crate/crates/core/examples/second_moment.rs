//! The exact second moment from the Psi semigroup, its limit, and the
//! walk-product representation of the limit.

use contact_path::lattice::{constants_for, gamma_d};
use contact_path::walks::{beta_product_closed_form, beta_walk_product, second_moment_exact, PsiMatrix};

fn main() -> contact_path::Result<()> {
    let (d, lambda) = (3, 2.0);
    let c = constants_for(d, lambda, gamma_d(d)?);
    println!("limit 1 + 1/h = {:.6}", c.second_moment_limit());

    let psi = PsiMatrix::new(d, lambda)?;
    for t in [1.0, 5.0, 10.0, 20.0] {
        let e = second_moment_exact(&psi, t, None)?;
        println!(
            "t={t:>4} E[eta^2] const-one={:.6} two-point={:.6} (radius {}, lost mass {:.1e})",
            e.row_sum,
            e.second_moment(1.0),
            e.radius,
            e.boundary_mass
        );
    }

    // The product has infinite variance here, so the error bar is only a guide.
    let beta = beta_walk_product(d, lambda, 50_000, 10_000, 5)?;
    println!(
        "walk product {:.4} +/- {:.4}, closed form {:.6}, excursion E[X^2]={:.3}",
        beta.product.mean,
        beta.product.stderr,
        beta_product_closed_form(&c),
        beta.excursion_second_moment
    );
    for w in &beta.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
