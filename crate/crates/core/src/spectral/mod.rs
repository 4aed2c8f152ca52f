//! Densities on the circle and their spectral functionals.

mod density;
mod distance;
mod functionals;

pub use density::{check_grid_size, Density, DensityRecord, ExtremalFamily, CLIP_BUDGET, MASS_TOL, ZERO_FLOOR};
pub use distance::{distance, w2_circle, Metric};
pub use functionals::{
    convolve, convolve_spectrum, dual_dirichlet_sum, free_energy, interaction_energy,
    interaction_energy_checked, relative_entropy,
};
pub(crate) use functionals::weighted_mode_sum;
