//! Mean-field free energies on the circle: spectral densities, interaction
//! kernels, critical points and phase transitions, Wasserstein gradient
//! flows, interacting particle systems and functional inequalities.

pub mod error;
pub mod exec;
pub mod cli;
pub mod critical;
pub mod fft;
pub mod inequality;
pub mod flow;
pub mod particles;
pub mod potentials;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
