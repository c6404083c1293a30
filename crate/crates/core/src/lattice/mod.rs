//! Lattice geometry, model parameters, random-walk constants.

mod constants;
mod escape;
pub mod green;
mod params;
mod torus;

pub use constants::{constants_for, derive_constants, DerivedConstants};
pub use escape::{estimate_gamma_d, DEFAULT_HORIZON};
pub use green::GreenFunction;
pub use params::ModelParams;
pub use torus::{Direction, Site, Torus};

use crate::error::Result;

/// Escape probability `gamma_d` from the lattice Green function.
pub fn gamma_d(d: usize) -> Result<f64> {
    Ok(GreenFunction::new(d)?.escape_probability())
}

/// Probability that the simple random walk from `x` ever hits the origin.
pub fn hitting_probability_k(x: &[i64]) -> Result<f64> {
    Ok(GreenFunction::new(x.len())?.hitting_probability(x))
}

/// Constants for `params` with `gamma_d` from the Green function.
pub fn constants(params: &ModelParams) -> Result<DerivedConstants> {
    Ok(derive_constants(params, gamma_d(params.d)?))
}
