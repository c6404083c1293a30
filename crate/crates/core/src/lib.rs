pub mod error;
pub mod fluct;
pub mod harness;
pub mod hydro;
pub mod lattice;
pub mod process;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod test_function;
pub mod walks;

pub use error::{Error, Result};
