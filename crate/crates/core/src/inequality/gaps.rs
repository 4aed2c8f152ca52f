use crate::error::{Error, Result};
use crate::fft;
use crate::potentials::Potential;
use crate::spectral::{check_grid_size, dual_dirichlet_sum, free_energy, relative_entropy, weighted_mode_sum, Density};
use serde::{Deserialize, Serialize};

/// Tolerance of the vanishing-moment constraint and of the periodicity check.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Allowed deviation of 2Ŵ(n+1) from 1 for a normalized kernel.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest |∫ e^φ e^{2πikθ}| / ∫ e^φ over 1 <= k <= n, with its mode.
pub fn tilted_moment_residual(phi: &[f64], n: usize) -> Result<(usize, f64)> {
    check_grid_size(phi.len())?;
    let top = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tilted: Vec<f64> = phi.iter().map(|v| (v - top).exp()).collect();
    let spec = fft::forward(&tilted);
    let mass = spec[0].re;
    Ok((1..=n.min(phi.len() / 2))
        .map(|k| (k, spec[fft::index_of(k as i64, phi.len())].norm() / mass))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a }))
}

/// Constrained Lebedev–Milin gap of a grid function φ:
/// (1/(n+1)) Σ_{k>=1} k|φ̂(k)|² - (log ∫e^φ - ∫φ).
///
/// The constraint (vanishing tilted moments 1..=n) is checked relative to ∫e^φ,
/// so the gap and the check are both invariant under φ -> φ + const.
pub fn lebedev_milin_gap(phi: &[f64], n: usize) -> Result<f64> {
    let m = phi.len();
    check_grid_size(m)?;
    if let Some(index) = phi.iter().position(|v| !v.is_finite()) {
        return Err(Error::NotFinite { index });
    }
    let (mode, residual) = tilted_moment_residual(phi, n)?;
    if residual > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated { mode, residual });
    }
    let spec = fft::forward(phi);
    let energy: f64 = (1..=m / 2)
        .map(|k| fft::one_sided_weight(k, m) * k as f64 * spec[k].norm_sqr())
        .sum::<f64>()
        / (n + 1) as f64;
    // log ∫ e^φ - ∫ φ = log ∫ e^{φ - mean}, evaluated around the maximum.
    let mean = spec[0].re;
    let top = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tilted = phi.iter().map(|v| (v - top).exp()).sum::<f64>() / m as f64;
    Ok(energy - (tilted.ln() + top - mean))
}

/// Errors unless every mode off the lattice (n+1)ℤ is below [`CONSTRAINT_TOL`].
pub fn check_periodic(q: &Density, n: usize) -> Result<()> {
    let (mode, magnitude) = q.off_lattice_max(n + 1);
    if magnitude > CONSTRAINT_TOL {
        return Err(Error::PeriodicityViolated { period: n + 1, mode, magnitude });
    }
    Ok(())
}

/// H(q|q_u) - (n+1) Σ_{k>=1} |q̂(k)|²/k for a 1/(n+1)-periodic density.
pub fn entropy_seminorm_gap(q: &Density, n: usize) -> Result<f64> {
    check_periodic(q, n)?;
    Ok(relative_entropy(q)? - dual_dirichlet_sum(q, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityTerms {
    /// H(q|q_u) - (n+1) Σ_{k>=1} |q̂(k)|²/k.
    pub term1: f64,
    /// Σ_{k>=1} ((n+1)/k - 2KŴ(k)) |q̂(k)|².
    pub term2: f64,
    /// F_K(q) - F_K(q_u), evaluated directly.
    pub total: f64,
}

impl CoercivityTerms {
    /// |term1 + term2 - total|.
    pub fn defect(&self) -> f64 {
        (self.term1 + self.term2 - self.total).abs()
    }
}

/// Splits F_K(q) into the entropy-seminorm gap and the mode-wise
/// coercivity sum for a normalized kernel and a 1/(n+1)-periodic density.
pub fn coercivity_gap(q: &Density, w: &Potential, coupling: f64, n: usize) -> Result<CoercivityTerms> {
    let lead = 2.0 * w.coeff(n + 1);
    if (lead - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::BadParams(format!("kernel is not normalized: 2Ŵ({}) = {lead}", n + 1)));
    }
    check_periodic(q, n)?;
    coercivity_split(q, w, coupling, n)
}

/// The same split with the seminorm sum running over every mode, which is
/// an identity for arbitrary densities and kernels.
pub fn coercivity_split(q: &Density, w: &Potential, coupling: f64, n: usize) -> Result<CoercivityTerms> {
    let p = (n + 1) as f64;
    let term1 = relative_entropy(q)? - dual_dirichlet_sum(q, n);
    let term2 = weighted_mode_sum(q, |k| p / k as f64 - 2.0 * coupling * w.coeff(k));
    let total = free_energy(q, w, coupling)?;
    Ok(CoercivityTerms { term1, term2, total })
}

/// Least-squares slope of log gap against log ε for the perturbations
/// q_u + ε cos(2π(n+1)θ) on an M-point grid; returns (slope, gaps).
pub fn sharpness_exponent(n: usize, eps: &[f64], m: usize) -> Result<(f64, Vec<f64>)> {
    check_grid_size(m)?;
    let p = (n + 1) as f64;
    let nodes = fft::grid_nodes(m);
    let gaps = eps
        .iter()
        .map(|&e| {
            let q = Density::from_grid(nodes.iter().map(|t| 1.0 + e * (2.0 * std::f64::consts::PI * p * t).cos()).collect())?;
            entropy_seminorm_gap(&q, n)
        })
        .collect::<Result<Vec<f64>>>()?;
    if gaps.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::DegenerateWindow(format!("non-positive gap in {gaps:?}")));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok((sxy / sxx, gaps))
}
