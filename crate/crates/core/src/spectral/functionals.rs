use super::density::{Density, ZERO_FLOOR};
use crate::error::{Error, Result};
use crate::fft;
use crate::potentials::Potential;
use num_complex::Complex64;

/// x log x - x + 1 written in terms of u = x - 1; nonnegative, zero at u = 0.
#[inline]
fn entropy_integrand(u: f64) -> f64 {
    if u <= -1.0 {
        1.0
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// H(q|q_u) = ∫ q log q by the periodic rectangle rule.
///
/// Evaluated as the mean of (1+u)log(1+u) - u with u = q - 1, which equals
/// Σ q_j log q_j / M for unit mass and keeps full precision near the
/// uniform state. Zero grid values contribute the limit 0·log 0 = 0.
pub fn relative_entropy(q: &Density) -> Result<f64> {
    let (index, value) = q.raw_min();
    if value < -ZERO_FLOOR {
        return Err(Error::NegativeDensity { index, value });
    }
    let m = q.grid_size() as f64;
    Ok(q.grid_values().iter().map(|v| entropy_integrand(v - 1.0)).sum::<f64>() / m)
}

/// Generic one-sided Parseval sum Σ_{k=1}^{M/2} weight(k) |q̂(k)|².
pub(crate) fn weighted_mode_sum(q: &Density, weight: impl Fn(usize) -> f64) -> f64 {
    let m = q.grid_size();
    (1..=m / 2)
        .map(|k| fft::one_sided_weight(k, m) * weight(k) * q.coeff(k as i64).norm_sqr())
        .sum()
}

/// (n+1) Σ_{k>=1} |q̂(k)|²/k = π(n+1)‖q - q_u‖²_{Ḣ^{-1/2}}.
pub fn dual_dirichlet_sum(q: &Density, n: usize) -> f64 {
    (n + 1) as f64 * weighted_mode_sum(q, |k| 1.0 / k as f64)
}

/// ∬ W(θ-θ') dq dq' = 2 Σ_{k>=1} Ŵ(k)|q̂(k)|² over the modes resolved on the grid.
pub fn interaction_energy(q: &Density, w: &Potential) -> f64 {
    2.0 * weighted_mode_sum(q, |k| w.coeff(k))
}

/// Interaction energy with a certificate that the kernel modes beyond both
/// the grid and the truncation contribute at most `tol`.
pub fn interaction_energy_checked(q: &Density, w: &Potential, tol: f64) -> Result<f64> {
    let resolved = (q.grid_size() / 2).min(w.truncation());
    let bound = 2.0 * w.tail_bound(resolved);
    if bound > tol {
        return Err(Error::TruncationTooCoarse { truncation: resolved, bound, tol });
    }
    Ok(interaction_energy(q, w))
}

/// F_K(q) = H(q|q_u) - K ∬ W dq dq'.
pub fn free_energy(q: &Density, w: &Potential, coupling: f64) -> Result<f64> {
    Ok(relative_entropy(q)? - coupling * interaction_energy(q, w))
}

/// Spectrum of W*q: Ŵ(k) q̂(k), Nyquist included with the real part only.
pub fn convolve_spectrum(w: &Potential, q: &Density) -> Vec<Complex64> {
    let m = q.grid_size();
    q.spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = fft::mode_of(i, m).unsigned_abs() as usize;
            c * w.coeff(k)
        })
        .collect()
}

/// Grid values of W*q.
pub fn convolve(w: &Potential, q: &Density) -> Vec<f64> {
    fft::inverse(&convolve_spectrum(w, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_potential, ModelParams};
    use crate::spectral::ExtremalFamily;
    use std::f64::consts::PI;

    fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Density {
        Density::from_grid(fft::grid_nodes(m).into_iter().map(f).collect()).unwrap()
    }

    /// Adaptive Simpson quadrature, independent of the grid rule.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(relative_entropy(&Density::uniform(64).unwrap()).unwrap(), 0.0);
        let q = ExtremalFamily::new(1, 0.5, 0.0).unwrap().density(1024).unwrap();
        assert!((relative_entropy(&q).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        let q = from_fn(1024, |t| 1.0 + 0.3 * (2.0 * PI * t).cos());
        let f = |t: f64| {
            let v = 1.0 + 0.3 * (2.0 * PI * t).cos();
            v * v.ln()
        };
        let oracle = adaptive_simpson(&f, -0.5, 0.5, 1e-14);
        assert!((relative_entropy(&q).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn dual_dirichlet_values() {
        assert_eq!(dual_dirichlet_sum(&Density::uniform(32).unwrap(), 3), 0.0);
        let q = ExtremalFamily::new(1, 0.5, 0.0).unwrap().density(1024).unwrap();
        assert!((dual_dirichlet_sum(&q, 1) + (0.75f64).ln()).abs() < 1e-12);
        let q = from_fn(256, |t| 1.0 + 0.4 * (4.0 * PI * t).cos());
        assert!((dual_dirichlet_sum(&q, 1) - 0.04).abs() < 1e-14);
    }

    #[test]
    fn interaction_energy_doi_onsager() {
        let w = make_potential(&ModelParams::DoiOnsager, 256).unwrap();
        let q = from_fn(256, |t| 1.0 + (4.0 * PI * t).cos());
        assert!((interaction_energy(&q, &w) - 1.0 / (3.0 * PI)).abs() < 1e-14);
        let q = from_fn(256, |t| 1.0 + (2.0 * PI * t).cos());
        assert!(interaction_energy(&q, &w).abs() < 1e-15);
        assert_eq!(interaction_energy(&Density::uniform(256).unwrap(), &w), 0.0);
    }

    #[test]
    fn truncation_certificate() {
        let w = make_potential(&ModelParams::DoiOnsager, 16).unwrap();
        let q = Density::uniform(256).unwrap();
        assert!(matches!(interaction_energy_checked(&q, &w, 1e-6), Err(Error::TruncationTooCoarse { .. })));
        let w = make_potential(&ModelParams::Transformer { beta: 1.0 }, 64).unwrap();
        assert!(interaction_energy_checked(&q, &w, 1e-12).is_ok());
    }

    #[test]
    fn free_energy_reduces_to_entropy_without_coupling() {
        let w = make_potential(&ModelParams::HegselmannKrause { radius: 2.0 }, 128).unwrap();
        let q = from_fn(256, |t| 1.0 + 0.5 * (2.0 * PI * t).sin());
        assert_eq!(free_energy(&q, &w, 0.0).unwrap(), relative_entropy(&q).unwrap());
        assert_eq!(free_energy(&Density::uniform(256).unwrap(), &w, 7.0).unwrap(), 0.0);
    }

    #[test]
    fn convolution_examples() {
        let w = make_potential(&ModelParams::Custom { coeffs: vec![0.5] }, 8).unwrap();
        let q = from_fn(64, |t| 1.0 + (2.0 * PI * t).cos());
        for (t, v) in fft::grid_nodes(64).iter().zip(convolve(&w, &q)) {
            assert!((v - 0.5 * (2.0 * PI * t).cos()).abs() < 1e-14);
        }
        let u = convolve(&w, &Density::uniform(64).unwrap());
        assert!(u.iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn convolution_matches_direct_sum() {
        // O(M²) circular convolution with the closed-form kernel, truncated
        // identically so both sides see the same discrete kernel.
        let m = 256;
        let w = make_potential(&ModelParams::Transformer { beta: 1.0 }, m / 2).unwrap();
        let q = ExtremalFamily::new(0, 0.5, 0.0).unwrap().density(m).unwrap();
        let nodes = fft::grid_nodes(m);
        let fast = convolve(&w, &q);
        for (i, &ti) in nodes.iter().enumerate() {
            let direct: f64 = nodes
                .iter()
                .zip(q.grid_values())
                .map(|(&tj, &qj)| w.eval(ti - tj).unwrap() * qj)
                .sum::<f64>()
                / m as f64;
            assert!((direct - fast[i]).abs() < 1e-10, "i={i}");
        }
    }
}
