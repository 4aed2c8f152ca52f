//! Closed Fourier hierarchy of the log-gas flow (Ŵ(k) = 1/(2k)):
//! 2 dq̂(k)/dt = -4π²k(k-K)q̂(k) + 4π²kK Σ_{j=1}^{k-1} q̂(j)q̂(k-j).
//! Mode k depends only on modes 1..=k.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Right-hand side for coefficients `c[i] = q̂(i+1)`, i = 0..M-1.
pub fn loggas_rhs(c: &[Complex64], coupling: f64) -> Vec<Complex64> {
    let four_pi2 = 4.0 * PI * PI;
    (0..c.len())
        .map(|i| {
            let k = (i + 1) as f64;
            let conv: Complex64 = (0..i).map(|j| c[j] * c[i - 1 - j]).sum();
            0.5 * (-four_pi2 * k * (k - coupling) * c[i] + four_pi2 * k * coupling * conv)
        })
        .collect()
}

/// Largest step for which classical RK4 is stable on the stiffest linear
/// mode; the real-axis stability interval of RK4 is about [-2.78, 0].
pub fn rk4_step_bound(modes: usize, coupling: f64) -> f64 {
    let k = modes as f64;
    let rate = 2.0 * PI * PI * k * (k - coupling).abs();
    2.78 / rate.max(1e-300)
}

pub fn rk4_step(c: &[Complex64], coupling: f64, dt: f64) -> Vec<Complex64> {
    let axpy = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = loggas_rhs(c, coupling);
    let k2 = loggas_rhs(&axpy(c, &k1, 0.5 * dt), coupling);
    let k3 = loggas_rhs(&axpy(c, &k2, 0.5 * dt), coupling);
    let k4 = loggas_rhs(&axpy(c, &k3, dt), coupling);
    c.iter()
        .enumerate()
        .map(|(i, x)| x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates the hierarchy with RK4, returning coefficient snapshots at
/// each time in `times` (increasing, starting at or after 0).
pub fn integrate_loggas(c0: &[Complex64], coupling: f64, dt: f64, times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let bound = rk4_step_bound(c0.len(), coupling);
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let mut c = c0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-14 {
            let h = dt.min(target - t);
            c = rk4_step(&c, coupling, h);
            t = if target - t <= dt { target } else { t + h };
        }
        out.push(c.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_state_is_stationary() {
        let z = vec![Complex64::new(0.0, 0.0); 16];
        assert!(loggas_rhs(&z, 1.7).iter().all(|d| d.norm() == 0.0));
    }

    #[test]
    fn stationary_family() {
        for n in [1usize, 2] {
            let mut c = vec![Complex64::new(0.0, 0.0); 32];
            let mut m = 1;
            while m * n <= 32 {
                c[m * n - 1] = Complex64::new(0.5f64.powi(m as i32), 0.0);
                m += 1;
            }
            let d = loggas_rhs(&c, n as f64);
            assert!(d.iter().all(|x| x.norm() <= 1e-14), "n={n}");
        }
    }

    #[test]
    fn heat_decay_is_fourth_order() {
        let c0 = vec![Complex64::new(0.3, 0.1), Complex64::new(0.05, 0.0)];
        let exact = |t: f64| c0[0] * (-2.0 * PI * PI * t).exp();
        let err = |dt: f64| (integrate_loggas(&c0, 0.0, dt, &[0.1]).unwrap()[0][0] - exact(0.1)).norm();
        let order = (err(1e-2) / err(5e-3)).log2();
        assert!(order > 3.8 && order < 4.2, "{order}");
    }

    #[test]
    fn stiff_step_rejected() {
        let c0 = vec![Complex64::new(0.1, 0.0); 64];
        assert!(matches!(integrate_loggas(&c0, 1.0, 1e-3, &[0.1]), Err(Error::StepTooLarge { .. })));
    }
}
