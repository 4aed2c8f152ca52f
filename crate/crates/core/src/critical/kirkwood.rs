//! Kirkwood–Monroe self-consistency q = e^{2K(W*q)}/Z: damped Picard
//! iteration and a Levenberg–Marquardt polish on the potential's low modes.

use crate::error::{Error, Result};
use crate::fft;
use crate::potentials::Potential;
use crate::spectral::{convolve, free_energy, Density};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Largest exponent accepted before the Gibbs factor is considered unresolvable.
pub const MAX_EXPONENT: f64 = 700.0;

/// Normalized e^{v} on the grid.
fn gibbs(v: &[f64]) -> Result<Density> {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    Density::from_grid(e.into_iter().map(|x| x / mean).collect())
}

fn exponent(q: &Density, w: &Potential, coupling: f64) -> Result<Vec<f64>> {
    let v: Vec<f64> = convolve(w, q).into_iter().map(|x| 2.0 * coupling * x).collect();
    let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if big > MAX_EXPONENT {
        return Err(Error::ExpOverflow(big));
    }
    Ok(v)
}

/// T(q) = e^{2K(W*q)} normalized to unit mass.
pub fn km_map(q: &Density, w: &Potential, coupling: f64) -> Result<Density> {
    gibbs(&exponent(q, w, coupling)?)
}

fn sup_diff(a: &Density, b: &Density) -> f64 {
    a.grid_values()
        .iter()
        .zip(b.grid_values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// ‖q - T(q)‖_∞.
pub fn fixed_point_residual(q: &Density, w: &Potential, coupling: f64) -> Result<f64> {
    Ok(sup_diff(q, &km_map(q, w, coupling)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol: f64,
    /// Initial Picard damping α ∈ (0, 1].
    pub damping: f64,
    pub max_iter: usize,
    /// Picard iterations before the Newton polish takes over.
    pub warmup: usize,
    pub newton_iter: usize,
    /// Number of low potential modes treated by Newton; higher modes use Picard.
    pub newton_modes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            damping: 1.0,
            max_iter: 5000,
            warmup: 60,
            newton_iter: 60,
            newton_modes: 96,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub density: Density,
    pub residual: f64,
    pub free_energy: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub damping_used: f64,
    pub seed_id: String,
    pub converged: bool,
}

impl SolveReport {
    pub fn order_parameter(&self, k: usize) -> f64 {
        self.density.order_parameter(k)
    }
}

/// Halvings of α allowed when the residual fails to decrease over a window.
const MAX_HALVINGS: u32 = 6;
const OSCILLATION_WINDOW: usize = 50;

struct Picard {
    q: Density,
    alpha: f64,
    halvings: u32,
    iterations: usize,
    residual: f64,
    window_start: f64,
}

impl Picard {
    fn new(q: Density, alpha: f64, w: &Potential, coupling: f64) -> Result<Self> {
        let residual = fixed_point_residual(&q, w, coupling)?;
        Ok(Self { q, alpha, halvings: 0, iterations: 0, residual, window_start: residual })
    }

    /// Runs until `tol`, or until `budget` more iterations are spent.
    fn run(&mut self, w: &Potential, coupling: f64, tol: f64, budget: usize) -> Result<()> {
        for _ in 0..budget {
            if self.residual <= tol {
                return Ok(());
            }
            let t = km_map(&self.q, w, coupling)?;
            let a = self.alpha;
            let mixed: Vec<f64> = self
                .q
                .grid_values()
                .iter()
                .zip(t.grid_values())
                .map(|(x, y)| (1.0 - a) * x + a * y)
                .collect();
            self.q = Density::from_grid(mixed)?;
            self.residual = fixed_point_residual(&self.q, w, coupling)?;
            self.iterations += 1;
            if self.iterations % OSCILLATION_WINDOW == 0 {
                if self.residual >= self.window_start && self.halvings < MAX_HALVINGS {
                    self.alpha *= 0.5;
                    self.halvings += 1;
                }
                self.window_start = self.residual;
            }
        }
        Ok(())
    }
}

fn report(q: Density, w: &Potential, coupling: f64, residual: f64, iterations: usize, newton: usize, alpha: f64, seed: &str, tol: f64) -> Result<SolveReport> {
    let free_energy = free_energy(&q, w, coupling)?;
    Ok(SolveReport {
        density: q,
        residual,
        free_energy,
        iterations,
        newton_iterations: newton,
        damping_used: alpha,
        seed_id: seed.to_string(),
        converged: residual <= tol,
    })
}

/// Damped Picard iteration q ← (1-α)q + α T(q). α is halved (at most six
/// times) whenever the residual does not decrease over 50 iterations.
/// Non-convergence is reported through `converged = false`.
pub fn solve_fixed_point(w: &Potential, coupling: f64, q0: &Density, opts: &SolveOptions, seed: &str) -> Result<SolveReport> {
    let mut p = Picard::new(q0.clone(), opts.damping, w, coupling)?;
    p.run(w, coupling, opts.tol, opts.max_iter)?;
    report(p.q, w, coupling, p.residual, p.iterations, 0, p.alpha, seed, opts.tol)
}

/// Picard warm-up, then Levenberg–Marquardt on the low modes of the
/// potential v = 2K(W*q) with Picard updates on the remaining modes; falls
/// back to damped Picard for the rest of the budget if the polish stalls.
pub fn solve_critical_point(w: &Potential, coupling: f64, q0: &Density, opts: &SolveOptions, seed: &str) -> Result<SolveReport> {
    let mut p = Picard::new(q0.clone(), opts.damping, w, coupling)?;
    p.run(w, coupling, opts.tol, opts.warmup)?;
    if p.residual <= opts.tol {
        return report(p.q, w, coupling, p.residual, p.iterations, 0, p.alpha, seed, opts.tol);
    }
    let solver = Newton::new(w, coupling, p.q.grid_size(), opts.newton_modes);
    let (q, residual, steps) = solver.polish(&p.q, opts.tol, opts.newton_iter)?;
    if residual <= opts.tol {
        return report(q, w, coupling, residual, p.iterations + steps, steps, p.alpha, seed, opts.tol);
    }
    let budget = opts.max_iter.saturating_sub(p.iterations + steps);
    let start = if residual < p.residual { q } else { p.q.clone() };
    let mut p2 = Picard::new(start, p.alpha, w, coupling)?;
    p2.run(w, coupling, opts.tol, budget)?;
    report(p2.q, w, coupling, p2.residual, p.iterations + steps + p2.iterations, steps, p2.alpha, seed, opts.tol)
}

struct Newton<'a> {
    w: &'a Potential,
    coupling: f64,
    m: usize,
    /// Modes of v that can be nonzero: active kernel modes below Nyquist.
    modes: Vec<usize>,
    low: usize,
    /// cos/sin tables for the low modes on the grid.
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl<'a> Newton<'a> {
    fn new(w: &'a Potential, coupling: f64, m: usize, max_low: usize) -> Self {
        let modes: Vec<usize> = w.active_modes().filter(|&k| k < m / 2).collect();
        let low = modes.len().min(max_low);
        let nodes = fft::grid_nodes(m);
        let tau = 2.0 * std::f64::consts::PI;
        let cos = modes[..low].iter().map(|&k| nodes.iter().map(|t| (tau * k as f64 * t).cos()).collect()).collect();
        let sin = modes[..low].iter().map(|&k| nodes.iter().map(|t| (tau * k as f64 * t).sin()).collect()).collect();
        Self { w, coupling, m, modes, low, cos, sin }
    }

    /// Grid function with v̂(±k) given on `modes`.
    fn grid(&self, vhat: &[Complex64]) -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.m];
        for (&k, &c) in self.modes.iter().zip(vhat) {
            spec[k] = c;
            spec[self.m - k] = c.conj();
        }
        fft::inverse(&spec)
    }

    /// 2KŴ(k)q̂(k) on `modes`.
    fn target(&self, q: &Density) -> Vec<Complex64> {
        self.modes.iter().map(|&k| 2.0 * self.coupling * self.w.coeff(k) * q.coeff(k as i64)).collect()
    }

    fn state(&self, vhat: &[Complex64]) -> Result<(Density, Vec<Complex64>)> {
        let v = self.grid(vhat);
        let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if big > MAX_EXPONENT {
            return Err(Error::ExpOverflow(big));
        }
        let q = gibbs(&v)?;
        let g: Vec<Complex64> = self.target(&q).iter().zip(vhat).map(|(t, v)| t - v).collect();
        Ok((q, g))
    }

    fn merit(g: &[Complex64]) -> f64 {
        g.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Jacobian of the low-mode equations with respect to low-mode unknowns,
    /// in (Re, Im) pairs.
    fn jacobian(&self, q: &Density) -> DMatrix<f64> {
        let n = 2 * self.low;
        let mut jac = DMatrix::zeros(n, n);
        let qv = q.grid_values();
        let m = self.m as f64;
        for col in 0..n {
            let (i, imag) = (col / 2, col % 2 == 1);
            // Real part a: δv = 2a cos; imaginary part b: δv = -2b sin.
            let basis: Vec<f64> = if imag {
                self.sin[i].iter().map(|s| -2.0 * s).collect()
            } else {
                self.cos[i].iter().map(|c| 2.0 * c).collect()
            };
            let mean = qv.iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>() / m;
            let dq: Vec<f64> = qv.iter().zip(&basis).map(|(a, b)| a * (b - mean)).collect();
            let spec = fft::forward(&dq);
            for r in 0..self.low {
                let k = self.modes[r];
                let d = 2.0 * self.coupling * self.w.coeff(k) * spec[k];
                jac[(2 * r, col)] = d.re;
                jac[(2 * r + 1, col)] = d.im;
            }
            jac[(col, col)] -= 1.0;
        }
        jac
    }

    fn polish(&self, q0: &Density, tol: f64, max_iter: usize) -> Result<(Density, f64, usize)> {
        let mut vhat = self.target(q0);
        let (mut q, mut g) = self.state(&vhat)?;
        let mut merit = Self::merit(&g);
        let mut mu = 1e-10;
        let mut best = (q.clone(), fixed_point_residual(&q, self.w, self.coupling)?);
        for it in 0..max_iter {
            if best.1 <= tol {
                return Ok((best.0, best.1, it));
            }
            let jac = self.jacobian(&q);
            let rhs = DVector::from_iterator(2 * self.low, g[..self.low].iter().flat_map(|c| [c.re, c.im]));
            let jt = jac.transpose();
            let normal = &jt * &jac;
            let grad = &jt * &rhs;
            let scale = normal.diagonal().max().max(1e-300);
            let mut accepted = false;
            for _ in 0..12 {
                let mut a = normal.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += mu * scale;
                }
                let Some(chol) = a.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = chol.solve(&grad);
                let mut trial = vhat.clone();
                for (i, t) in trial.iter_mut().enumerate() {
                    if i < self.low {
                        *t -= Complex64::new(step[2 * i], step[2 * i + 1]);
                    } else {
                        *t += g[i];
                    }
                }
                match self.state(&trial) {
                    Ok((tq, tg)) if Self::merit(&tg) < merit => {
                        vhat = trial;
                        q = tq;
                        g = tg;
                        merit = Self::merit(&g);
                        mu = (mu / 4.0).max(1e-14);
                        accepted = true;
                        break;
                    }
                    Ok(_) | Err(Error::ExpOverflow(_)) => mu *= 8.0,
                    Err(e) => return Err(e),
                }
            }
            if !accepted {
                return Ok((best.0, best.1, it + 1));
            }
            let r = fixed_point_residual(&q, self.w, self.coupling)?;
            if r < best.1 {
                best = (q.clone(), r);
            }
        }
        Ok((best.0, best.1, max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_potential, normalize, ModelParams};
    use crate::spectral::ExtremalFamily;
    use std::f64::consts::PI;

    fn cosine(m: usize, a: f64, k: f64) -> Density {
        Density::from_grid(fft::grid_nodes(m).iter().map(|t| 1.0 + a * (2.0 * PI * k * t).cos()).collect()).unwrap()
    }

    fn doi_onsager_normalized() -> Potential {
        normalize(&make_potential(&ModelParams::DoiOnsager, 256).unwrap(), 1).unwrap().0
    }

    #[test]
    fn uniform_is_fixed() {
        let w = doi_onsager_normalized();
        let u = Density::uniform(128).unwrap();
        assert_eq!(fixed_point_residual(&u, &w, 3.0).unwrap(), 0.0);
        let r = solve_fixed_point(&w, 3.0, &u, &SolveOptions::default(), "u").unwrap();
        assert!(r.converged && r.iterations == 0 && r.residual == 0.0);
    }

    #[test]
    fn zero_coupling_maps_to_uniform() {
        let w = doi_onsager_normalized();
        let t = km_map(&cosine(64, 0.5, 2.0), &w, 0.0).unwrap();
        assert!(t.grid_values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn log_gas_family_is_fixed() {
        let w = make_potential(&ModelParams::LogGas, 64).unwrap();
        for c in [0.2, 0.5] {
            let q = ExtremalFamily::new(0, c, 0.0).unwrap().density(256).unwrap();
            assert!(fixed_point_residual(&q, &w, 1.0).unwrap() < 1e-8, "c={c}");
        }
    }

    #[test]
    fn overflow_is_reported() {
        let w = doi_onsager_normalized();
        let q = ExtremalFamily::new(1, 0.9, 0.0).unwrap().density(128).unwrap();
        assert!(matches!(km_map(&q, &w, 1e4), Err(Error::ExpOverflow(_))));
    }

    #[test]
    fn picard_subcritical_and_supercritical() {
        let w = doi_onsager_normalized();
        let q0 = cosine(256, 0.5, 2.0);
        let r = solve_fixed_point(&w, 0.9, &q0, &SolveOptions::default(), "c").unwrap();
        assert!(r.converged && r.order_parameter(2) < 1e-8);
        let r = solve_fixed_point(&w, 1.2, &q0, &SolveOptions::default(), "c").unwrap();
        assert!(r.converged, "residual {}", r.residual);
        assert!(r.free_energy < 0.0 && r.order_parameter(2) > 0.1);
    }

    #[test]
    fn newton_matches_picard() {
        let w = doi_onsager_normalized();
        let q0 = cosine(256, 0.5, 2.0);
        let opts = SolveOptions { tol: 1e-12, ..Default::default() };
        let a = solve_fixed_point(&w, 1.2, &q0, &opts, "p").unwrap();
        let b = solve_critical_point(&w, 1.2, &q0, &opts, "n").unwrap();
        assert!(a.converged && b.converged);
        assert!(b.iterations < a.iterations);
        assert!((a.free_energy - b.free_energy).abs() < 1e-11);
        assert!((a.order_parameter(2) - b.order_parameter(2)).abs() < 1e-9);
    }

    #[test]
    fn first_variation_condition() {
        let w = doi_onsager_normalized();
        let opts = SolveOptions { tol: 1e-11, ..Default::default() };
        let r = solve_critical_point(&w, 1.3, &cosine(256, 0.6, 2.0), &opts, "s").unwrap();
        assert!(r.converged);
        let v = convolve(&w, &r.density);
        let g: Vec<f64> = r.density.grid_values().iter().zip(&v).map(|(q, c)| q.ln() - 2.0 * 1.3 * c).collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        // log q is bounded here, so the sup-norm residual in q controls log q.
        assert!(g.iter().all(|x| (x - mean).abs() <= 10.0 * opts.tol / r.density.grid_values().iter().cloned().fold(f64::INFINITY, f64::min)));
        let (_, off) = r.density.off_lattice_max(2);
        assert!(off <= 10.0 * opts.tol);
    }
}
