//! Critical points of the free energy, global minimizer search, critical
//! coupling scans and closed-form stability quantities.

mod kirkwood;
mod minimize;
mod scan;
mod stability;

pub use kirkwood::{fixed_point_residual, km_map, solve_critical_point, solve_fixed_point, SolveOptions, SolveReport, MAX_EXPONENT};
pub use minimize::{find_minimizer, standard_seeds, MinimizerSearch, Seed, TIE_TOL};
pub use scan::{classify, scan_grid, scan_kc, Continuity, PhaseDiagram, ScanOptions, ScanRow};
pub use stability::{k_star, lambda_star, landau_min, landau_p, SpectralGap};
