//! Harmonic maps of surfaces into `CPⁿ`, handled through local lifts `F`.
//!
//! Every map supplies second-order jets of a lift in each chart; all exported
//! quantities are invariant under `F ↦ hF`. Densities use the normalization
//! `g_{CPⁿ} = 4 g_FS`, so `CP¹` is the unit sphere.

mod analysis;
mod battery;
mod frenet;
mod maps;
mod spinors;

pub use analysis::*;
pub use battery::*;
pub use frenet::*;
pub use maps::*;
pub use spinors::*;
