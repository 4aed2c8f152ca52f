//! Interacting particle system on the circle and its mean-field comparison.

mod chaos;
mod dynamics;
mod gridding;

pub use chaos::{chaos_check, ChaosOptions, ChaosReport, DEFAULT_DT, MIN_PARTICLES};
pub use dynamics::{
    drift, em_step, em_step_with_increments, empirical_fourier, empirical_moduli, simulate, ForceMode,
    ParticleState, ParticleTrace, SimulationOptions, MAX_DT,
};
