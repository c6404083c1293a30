//! Compare empirical pairings with the heat equation solution as N grows.

use contact_path::hydro::lln_error;
use contact_path::lattice::ModelParams;
use contact_path::process::{DensityShape, InitialLaw, Marginal};
use contact_path::test_function::TestFunction;

fn main() -> contact_path::Result<()> {
    let period = 4.0;
    let law = InitialLaw::Profile {
        shape: DensityShape::Bump { level: 0.5, amplitude: 1.0, center: vec![2.0; 3], width: 0.5 },
        marginal: Marginal::ConstantOne,
    };
    let gs = [
        TestFunction::gaussian(vec![2.0; 3], 0.5, period),
        TestFunction::cosine(vec![1, 0, 0], period),
    ];
    let ts = [0.05, 0.1];

    for n in [4, 8] {
        let params = ModelParams::new(3, 2.0, 0.5, 0.0, n, 4 * n, 0.1)?;
        let table = lln_error(&params, &law, &gs, &ts, 64, 3)?;
        for c in &table.cells {
            println!(
                "N={n:>2} t={:.2} G{} pde={:.5} sim={:.5}+/-{:.5} |err|={:.5}",
                c.t, c.g_index, c.predicted, c.simulated, c.simulated_stderr, c.abs_error
            );
        }
        for d in &table.drift {
            println!("N={n:>2} t={:.2} centre shift pde={:.4} sim={:.4}", d.t, d.predicted, d.simulated);
        }
    }
    Ok(())
}
