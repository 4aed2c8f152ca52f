//! B-spline gridding nonuniform FFTs for the truncated Fourier force.
//!
//! Type 1: S(ℓ) = (1/N) Σ_j e^{-2πiℓx_j} for 1 <= ℓ <= L.
//! Type 2: f(x_j) = Σ_{1<=|ℓ|<=L} F(ℓ) e^{2πiℓx_j} for a real f.
//! Points are spread onto a periodic grid of G >= 32L nodes with the
//! centred cardinal B-spline of order 6, transformed with an FFT and
//! deconvolved by sinc⁶(ℓ/G). Aliasing is bounded by about 2(L/(G-L))⁶ ≈ 2e-9.

use crate::exec::Exec;
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

const ORDER: usize = 6;
const OVERSAMPLING: usize = 32;
/// Fixed spreading chunk, so the summation order does not depend on threads.
const SPREAD_CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub(crate) struct Gridder {
    modes: usize,
    grid: usize,
    /// 1/sinc⁶(ℓ/G) for ℓ = 1..=modes.
    deconv: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    start: usize,
    weights: [f64; ORDER],
}

/// w[j] = N_ORDER(f + ORDER - 1 - j) for f in [0, 1), by the uniform
/// B-spline recurrence N_k(t) = (t N_{k-1}(t) + (k - t) N_{k-1}(t - 1))/(k - 1).
fn bspline_weights(f: f64) -> [f64; ORDER] {
    let mut w = [0.0; ORDER];
    w[0] = 1.0 - f;
    w[1] = f;
    macro_rules! raise {
        ($k:literal) => {{
            let div = 1.0 / ($k - 1) as f64;
            w[$k - 1] = div * f * w[$k - 2];
            let mut j = 1;
            while j < $k - 1 {
                let i = $k - j - 1;
                w[i] = div * ((f + j as f64) * w[i - 1] + (($k - j) as f64 - f) * w[i]);
                j += 1;
            }
            w[0] *= div * (1.0 - f);
        }};
    }
    raise!(3);
    raise!(4);
    raise!(5);
    raise!(6);
    w
}

impl Gridder {
    /// Gridder for modes |ℓ| <= `modes`.
    pub(crate) fn new(modes: usize) -> Self {
        let grid = (OVERSAMPLING * modes.max(1)).next_power_of_two().max(64);
        let deconv = (1..=modes)
            .map(|l| {
                let x = PI * l as f64 / grid as f64;
                (x / x.sin()).powi(ORDER as i32)
            })
            .collect();
        Self { modes, grid, deconv }
    }

    /// Stencil of x = frac(θ·stride): first grid node and the B-spline
    /// weights of the ORDER nodes starting there.
    pub(crate) fn stencil(&self, theta: f64, stride: f64) -> Stencil {
        // θ >= -1/2 keeps the integer-shifted argument non-negative, so truncation is floor.
        let u = theta * stride + stride;
        let g = (u - (u as i64) as f64) * self.grid as f64;
        let i0 = (g as usize).min(self.grid - 1);
        let f = g - i0 as f64;
        // Node i0 - ORDER/2 + 1 + r has weight N_ORDER(f + ORDER - 1 - r).
        let weights = bspline_weights(f);
        let start = (i0 + self.grid + 1 - ORDER / 2) & (self.grid - 1);
        Stencil { start, weights }
    }

    /// Stencils of frac(θ_j·stride) for every θ_j.
    pub(crate) fn stencils(&self, theta: &[f64], stride: usize, exec: Exec) -> Vec<Stencil> {
        let s = stride as f64;
        exec.map(theta, |&t| self.stencil(t, s))
    }

    fn sign(l: usize) -> f64 {
        if l % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Type 1; returns S(ℓ) for ℓ = 1..=modes.
    pub(crate) fn empirical(&self, points: &[Stencil], exec: Exec) -> Vec<Complex64> {
        let mask = self.grid - 1;
        let starts: Vec<usize> = (0..points.len()).step_by(SPREAD_CHUNK).collect();
        let parts = exec.map(&starts, |&s| {
            let mut acc = vec![0.0; self.grid];
            for st in &points[s..(s + SPREAD_CHUNK).min(points.len())] {
                if st.start + ORDER <= self.grid {
                    for (a, w) in acc[st.start..st.start + ORDER].iter_mut().zip(&st.weights) {
                        *a += w;
                    }
                } else {
                    for (r, w) in st.weights.iter().enumerate() {
                        acc[(st.start + r) & mask] += w;
                    }
                }
            }
            acc
        });
        let mut grid = vec![0.0; self.grid];
        for p in parts {
            for (a, v) in grid.iter_mut().zip(p) {
                *a += v;
            }
        }
        // fft::forward is (1/G)Σ h_m e^{-2πiℓ(m/G - 1/2)}.
        let spec = fft::forward(&grid);
        let scale = self.grid as f64 / points.len() as f64;
        (1..=self.modes)
            .map(|l| spec[l] * (Self::sign(l) * scale * self.deconv[l - 1]))
            .collect()
    }

    /// Type 2 for a real function given f̂(ℓ), ℓ = 1..=modes (f̂(0) = 0);
    /// returns f at each point.
    pub(crate) fn evaluate(&self, coeffs: &[Complex64], points: &[Stencil], exec: Exec) -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.grid];
        for (i, c) in coeffs.iter().enumerate() {
            let l = i + 1;
            let d = c * (Self::sign(l) * self.deconv[i]);
            spec[l] = d;
            spec[self.grid - l] = d.conj();
        }
        let d = fft::inverse(&spec);
        let mask = self.grid - 1;
        exec.map(points, |st| {
            if st.start + ORDER <= self.grid {
                st.weights.iter().zip(&d[st.start..st.start + ORDER]).map(|(a, b)| a * b).sum()
            } else {
                st.weights.iter().enumerate().map(|(r, w)| w * d[(st.start + r) & mask]).sum()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn bspline_partition_of_unity() {
        for f in [0.0, 0.25, 0.5, 0.999] {
            let v = bspline_weights(f);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(v.iter().all(|x| *x >= 0.0));
        }
        // Centre value of the order-6 cardinal spline: 11/20.
        assert!((bspline_weights(0.0)[2] - 11.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn type1_matches_direct_sum() {
        let x = points(700);
        for (modes, stride) in [(8usize, 1usize), (64, 2), (100, 1)] {
            let g = Gridder::new(modes);
            let fast = g.empirical(&g.stencils(&x, stride, Exec::Sequential), Exec::Sequential);
            for l in 1..=modes {
                let k = (l * stride) as f64;
                let direct: Complex64 =
                    x.iter().map(|t| Complex64::from_polar(1.0, -2.0 * PI * k * t)).sum::<Complex64>() / x.len() as f64;
                assert!((fast[l - 1] - direct).norm() < 2e-9, "modes {modes} l {l}");
            }
        }
    }

    #[test]
    fn type2_matches_direct_sum() {
        let x = points(300);
        let modes = 64;
        let coeffs: Vec<Complex64> = (1..=modes).map(|l| Complex64::new(1.0 / l as f64, (l as f64).sin() / l as f64)).collect();
        let g = Gridder::new(modes);
        let fast = g.evaluate(&coeffs, &g.stencils(&x, 1, Exec::Sequential), Exec::Sequential);
        let norm: f64 = coeffs.iter().map(|c| 2.0 * c.norm()).sum();
        for (t, f) in x.iter().zip(&fast) {
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| 2.0 * (c * Complex64::from_polar(1.0, 2.0 * PI * (i + 1) as f64 * t)).re)
                .sum();
            assert!((f - direct).abs() < 2e-9 * norm, "{f} {direct}");
        }
    }
}
