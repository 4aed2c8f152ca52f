//! Discrete Fourier transforms in the crate's convention.
//!
//! Grid nodes are θ_j = -1/2 + j/M and coefficients are
//! q̂(k) = (1/M) Σ_j q_j e^{-2πikθ_j}, so the shift of the grid origin to -1/2
//! contributes a factor (-1)^k relative to the plain DFT. Full-length spectra
//! are stored in FFT order: index `i` holds mode `i` for `i <= M/2` and mode
//! `i - M` above.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[inline]
fn sign(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Mode number stored at FFT index `i` for a length-`m` spectrum.
#[inline]
pub fn mode_of(i: usize, m: usize) -> i64 {
    if i <= m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

/// FFT index of mode `k` (|k| <= M/2).
#[inline]
pub fn index_of(k: i64, m: usize) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (m as i64 + k) as usize
    }
}

pub fn forward_complex(buf: &mut [Complex64]) {
    let m = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(buf));
    let inv = 1.0 / m as f64;
    for (i, c) in buf.iter_mut().enumerate() {
        *c *= sign(i) * inv;
    }
}

pub fn inverse_complex(buf: &mut [Complex64]) {
    let m = buf.len();
    for (i, c) in buf.iter_mut().enumerate() {
        *c *= sign(i);
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m).process(buf));
}

/// Full spectrum of a real grid function.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_complex(&mut buf);
    buf
}

/// Real grid function from a (Hermitian) full spectrum.
pub fn inverse(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    inverse_complex(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Spectral derivative d/dθ of a full spectrum, in place. The Nyquist mode
/// is zeroed since its derivative is not real.
pub fn differentiate(spec: &mut [Complex64]) {
    let m = spec.len();
    for (i, c) in spec.iter_mut().enumerate() {
        let k = mode_of(i, m);
        if i == m / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64);
        }
    }
}

/// Weight of mode `k >= 1` in one-sided Parseval sums Σ_{k>=1} on an M-grid:
/// the Nyquist mode is its own mirror and counts half.
#[inline]
pub fn one_sided_weight(k: usize, m: usize) -> f64 {
    if k == m / 2 {
        0.5
    } else {
        1.0
    }
}

pub fn grid_nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| -0.5 + j as f64 / m as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_has_half_coefficients() {
        let m = 64;
        let v: Vec<f64> = grid_nodes(m).iter().map(|t| 1.0 + (2.0 * PI * 3.0 * t).cos()).collect();
        let s = forward(&v);
        assert!((s[0].re - 1.0).abs() < 1e-14);
        assert!((s[3] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((s[m - 3] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn shifted_sine_phase_follows_convention() {
        // sin(2πθ) = (e^{2πiθ} - e^{-2πiθ}) / 2i, so q̂(1) = -i/2.
        let m = 32;
        let v: Vec<f64> = grid_nodes(m).iter().map(|t| (2.0 * PI * t).sin()).collect();
        let s = forward(&v);
        assert!((s[1] - Complex64::new(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn round_trip() {
        let m = 128;
        let v: Vec<f64> = (0..m).map(|j| 1.0 + 0.3 * ((j * j) as f64).sin()).collect();
        let back = inverse(&forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
