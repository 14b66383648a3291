//! Pulled invasion fronts in reaction-diffusion systems: linear spreading
//! speeds, diffusive normal forms, critical fronts, weighted spectra,
//! self-similar tails and direct simulation.

pub mod dispersion;
pub mod error;
pub mod front;
pub mod linalg;
pub mod normal_form;
pub mod spectral;
pub mod systems;
pub mod simulator;
pub mod tail;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
