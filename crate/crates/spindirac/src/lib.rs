pub mod cli;
pub mod conformal_opt;
pub mod cpn_harmonic;
pub mod dirac_sphere;
pub mod dirac_torus;
pub mod error;
pub mod exact_spectrum;
pub mod fourier;
pub mod jet;
pub mod lattice_spin;
pub mod linalg;

pub use error::{Error, Result};
