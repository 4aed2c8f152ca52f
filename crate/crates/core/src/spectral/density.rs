use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Values in `[-ZERO_FLOOR, 0)` are treated as rounding noise and zeroed silently.
pub const ZERO_FLOOR: f64 = 1e-12;
/// Total clipped negative mass tolerated before construction fails.
pub const CLIP_BUDGET: f64 = 1e-6;
/// Mean deviation from 1 above which the grid is renormalized and flagged.
pub const MASS_TOL: f64 = 1e-8;

/// Probability density on 𝕋 = [-1/2, 1/2), held on a uniform grid of M = 2^p
/// nodes together with its Fourier coefficients.
#[derive(Clone, Debug)]
pub struct Density {
    values: Vec<f64>,
    spectrum: Vec<Complex64>,
    clipped_mass: f64,
    raw_min: (usize, f64),
    renormalized: bool,
}

pub fn check_grid_size(m: usize) -> Result<()> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::BadGridSize(m));
    }
    Ok(())
}

impl Density {
    pub fn uniform(m: usize) -> Result<Self> {
        check_grid_size(m)?;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        spectrum[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            values: vec![1.0; m],
            spectrum,
            clipped_mass: 0.0,
            raw_min: (0, 1.0),
            renormalized: false,
        })
    }

    /// Builds a density from grid values, clipping small negative excursions
    /// and renormalizing when the mean is off by more than [`MASS_TOL`].
    pub fn from_grid(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        check_grid_size(m)?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite { index });
        }
        let raw_min = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let mut clipped = 0.0;
        let mut values = values;
        for v in values.iter_mut() {
            if *v < 0.0 {
                if *v < -ZERO_FLOOR {
                    clipped -= *v;
                }
                *v = 0.0;
            }
        }
        let clipped_mass = clipped / m as f64;
        if clipped_mass > CLIP_BUDGET {
            return Err(Error::PositivityBudgetExceeded(clipped_mass));
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        if mean <= 0.0 {
            return Err(Error::NonPositiveMass(mean * m as f64));
        }
        let renormalized = (mean - 1.0).abs() > MASS_TOL;
        if renormalized {
            for v in values.iter_mut() {
                *v /= mean;
            }
        }
        let spectrum = deviation_spectrum(&values);
        Ok(Self {
            values,
            spectrum,
            clipped_mass,
            raw_min,
            renormalized,
        })
    }

    /// Builds a density from a full (FFT-ordered, Hermitian) spectrum.
    pub fn from_spectrum(spectrum: &[Complex64]) -> Result<Self> {
        check_grid_size(spectrum.len())?;
        Self::from_grid(fft::inverse(spectrum))
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    /// Full spectrum in FFT order.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// q̂(k) for |k| <= M/2; zero beyond the grid's resolution.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let m = self.grid_size();
        if k.unsigned_abs() as usize > m / 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.spectrum[fft::index_of(k, m)]
    }

    pub fn mass(&self) -> f64 {
        self.spectrum[0].re
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Smallest grid value (and its index) seen before clipping.
    pub fn raw_min(&self) -> (usize, f64) {
        self.raw_min
    }

    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn nodes(&self) -> Vec<f64> {
        fft::grid_nodes(self.grid_size())
    }

    /// Rotation by `shift` grid cells: q(θ) ↦ q(θ - shift/M).
    pub fn rotate_cells(&self, shift: usize) -> Self {
        let m = self.grid_size();
        let mut values = vec![0.0; m];
        for (j, v) in self.values.iter().enumerate() {
            values[(j + shift) % m] = *v;
        }
        let mut out = self.clone();
        out.spectrum = deviation_spectrum(&values);
        out.values = values;
        out
    }

    /// Exact spectral translation q(θ) ↦ q(θ - shift) for any real shift.
    pub fn translate(&self, shift: f64) -> Result<Self> {
        let m = self.grid_size();
        let spec: Vec<Complex64> = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = fft::mode_of(i, m);
                if i == m / 2 {
                    // Nyquist mode is not translation-covariant on the grid.
                    Complex64::new(c.re * (2.0 * PI * k as f64 * shift).cos(), 0.0)
                } else {
                    c * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * shift)
                }
            })
            .collect();
        Self::from_spectrum(&spec)
    }

    /// Order parameter |q̂(k)|.
    pub fn order_parameter(&self, k: usize) -> f64 {
        self.coeff(k as i64).norm()
    }

    /// Largest |q̂(k)| over modes not divisible by `period`.
    pub fn off_lattice_max(&self, period: usize) -> (usize, f64) {
        let m = self.grid_size();
        (1..=m / 2)
            .filter(|k| k % period != 0)
            .map(|k| (k, self.coeff(k as i64).norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord {
            grid_size: self.grid_size(),
            grid_values: self.values.clone(),
        }
    }
}

/// Spectrum computed from the deviation q - 1 so that small perturbations of
/// the uniform state keep full relative precision.
fn deviation_spectrum(values: &[f64]) -> Vec<Complex64> {
    let dev: Vec<f64> = values.iter().map(|v| v - 1.0).collect();
    let mut s = fft::forward(&dev);
    s[0] += 1.0;
    s[0].im = 0.0;
    let m = values.len();
    s[m / 2].im = 0.0;
    s
}

/// JSON form of a density: `{grid_size, grid_values}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityRecord {
    pub grid_size: usize,
    pub grid_values: Vec<f64>,
}

impl DensityRecord {
    pub fn into_density(self) -> Result<Density> {
        if self.grid_size != self.grid_values.len() {
            return Err(Error::GridMismatch(self.grid_size, self.grid_values.len()));
        }
        Density::from_grid(self.grid_values)
    }
}

/// The equality family q_{c,n}(θ - θ₀) = (1 - c²)/(1 + c² - 2c cos(2π(n+1)(θ - θ₀))).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalFamily {
    pub n: usize,
    pub c: f64,
    pub shift: f64,
}

impl ExtremalFamily {
    pub fn new(n: usize, c: f64, shift: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::BadParams(format!("extremal family needs c in [0,1), got {c}")));
        }
        Ok(Self { n, c, shift })
    }

    pub fn value(&self, theta: f64) -> f64 {
        let c = self.c;
        let arg = 2.0 * PI * (self.n + 1) as f64 * (theta - self.shift);
        (1.0 - c * c) / (1.0 + c * c - 2.0 * c * arg.cos())
    }

    /// Exact coefficient: c^ℓ e^{-2πi(n+1)ℓθ₀} at k = (n+1)ℓ, zero off the lattice.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        let p = (self.n + 1) as i64;
        if k % p != 0 {
            return Complex64::new(0.0, 0.0);
        }
        let l = (k / p).unsigned_abs() as i32;
        Complex64::from_polar(self.c.powi(l), -2.0 * PI * k as f64 * self.shift)
    }

    pub fn density(&self, m: usize) -> Result<Density> {
        check_grid_size(m)?;
        Density::from_grid(fft::grid_nodes(m).iter().map(|&t| self.value(t)).collect())
    }

    /// Closed-form relative entropy -log(1 - c²).
    pub fn entropy(&self) -> f64 {
        -(-self.c * self.c).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        fft::grid_nodes(m).into_iter().map(f).collect()
    }

    #[test]
    fn uniform_from_ones() {
        let q = Density::from_grid(vec![1.0; 64]).unwrap();
        assert!((q.mass() - 1.0).abs() < 1e-15);
        for k in 1..=32 {
            assert!(q.coeff(k).norm() < 1e-15);
        }
    }

    #[test]
    fn single_mode_identity() {
        let q = Density::from_grid(grid(128, |t| 1.0 + (2.0 * PI * t).cos())).unwrap();
        assert!((q.coeff(1) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((q.coeff(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        for k in 2..=64 {
            assert!(q.coeff(k).norm() < 1e-12);
        }
    }

    #[test]
    fn extremal_family_coefficients() {
        let fam = ExtremalFamily::new(1, 0.5, 0.0).unwrap();
        let q = fam.density(256).unwrap();
        for l in 1..20 {
            assert!((q.coeff(2 * l) - Complex64::new(0.5f64.powi(l as i32), 0.0)).norm() < 1e-10);
            assert!(q.coeff(2 * l - 1).norm() < 1e-10);
        }
        let shifted = ExtremalFamily::new(2, 0.4, 0.07).unwrap();
        let qs = shifted.density(256).unwrap();
        for k in -12..=12 {
            assert!((qs.coeff(k) - shifted.coefficient(k)).norm() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Density::from_grid(vec![1.0; 48]).unwrap_err(), Error::BadGridSize(48));
        let mut v = vec![1.0; 16];
        v[3] = f64::NAN;
        assert_eq!(Density::from_grid(v).unwrap_err(), Error::NotFinite { index: 3 });
        assert!(matches!(Density::from_grid(vec![0.0; 16]), Err(Error::NonPositiveMass(_))));
        let mut v = vec![1.0; 16];
        v[0] = -0.5;
        assert!(matches!(Density::from_grid(v), Err(Error::PositivityBudgetExceeded(_))));
    }

    #[test]
    fn clips_tiny_negatives_and_renormalizes() {
        let mut v = vec![2.0; 16];
        v[5] = -1e-9;
        let q = Density::from_grid(v).unwrap();
        assert!(q.was_renormalized());
        assert_eq!(q.grid_values()[5], 0.0);
        assert!(q.clipped_mass() > 0.0 && q.clipped_mass() < 1e-9);
        assert!((q.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn translate_matches_cell_rotation() {
        let q = ExtremalFamily::new(0, 0.3, 0.0).unwrap().density(64).unwrap();
        let a = q.rotate_cells(5);
        let b = q.translate(5.0 / 64.0).unwrap();
        for (x, y) in a.grid_values().iter().zip(b.grid_values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
