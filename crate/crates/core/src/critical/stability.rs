use crate::error::{Error, Result};
use crate::potentials::{k_sharp, Potential};
use serde::{Deserialize, Serialize};

/// Landau quartic coefficient p(c) = ¼(1-w2)c² - c/8 + 1/32, with
/// w2 = 2Ŵ(2) under the normalization 2Ŵ(1) = 1.
pub fn landau_p(w2: f64, c: f64) -> f64 {
    0.25 * (1.0 - w2) * c * c - c / 8.0 + 1.0 / 32.0
}

/// Minimizer and minimum of p over c. For w2 >= 1 the quartic coefficient is
/// unbounded below along large c and (∞, -∞) is returned.
pub fn landau_min(w2: f64) -> (f64, f64) {
    if w2 >= 1.0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    (0.25 / (1.0 - w2), (1.0 - 2.0 * w2) / (64.0 * (1.0 - w2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub value: f64,
    pub mode: usize,
    /// K >= K_#: the uniform state is linearly unstable.
    pub supercritical: bool,
    /// Modes beyond the truncation cannot undercut the minimum.
    pub certified: bool,
}

/// λ_*(K) = min_k (k²/2)(1 - 2KŴ(k)) over the potential's periodic sector
/// (k a multiple of n+1); the dynamics started from 1/(n+1)-periodic data
/// never excites other modes.
pub fn lambda_star(w: &Potential, coupling: f64) -> Result<SpectralGap> {
    let p = w.periodicity() + 1;
    let l = w.truncation();
    let (mode, value) = (1..=l / p)
        .map(|j| {
            let k = j * p;
            (k, 0.5 * (k * k) as f64 * (1.0 - 2.0 * coupling * w.coeff(k)))
        })
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if mode == 0 {
        return Err(Error::BadParams("truncation below the first periodic mode".into()));
    }
    let sharp = k_sharp(w)?.value;
    // For k > L: 2KŴ(k) <= K/K_# (k_sharp certifies the tail), so the
    // term is at least ((L+1)²/2)(1 - K/K_#).
    let floor = 0.5 * ((l + 1) * (l + 1)) as f64 * (1.0 - coupling / sharp);
    Ok(SpectralGap {
        value,
        mode,
        supercritical: coupling >= sharp,
        certified: floor >= value,
    })
}

/// K_* = min over positive modes of (n+1)/(k·2Ŵ(k)).
pub fn k_star(w: &Potential, n: usize) -> Result<f64> {
    let period = n + 1;
    if let Some(mode) = w.active_modes().find(|k| k % period != 0) {
        return Err(Error::PeriodicityMismatch { mode, period });
    }
    let v = w
        .active_modes()
        .filter(|&k| w.coeff(k) > 0.0)
        .map(|k| period as f64 / (k as f64 * 2.0 * w.coeff(k)))
        .fold(f64::INFINITY, f64::min);
    if v.is_infinite() {
        return Err(Error::NoAttractivePart);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{check_decay, make_potential, ModelParams};
    use std::f64::consts::PI;

    #[test]
    fn landau_values() {
        assert_eq!(landau_min(0.5).1, 0.0);
        let (c, p) = landau_min(0.6);
        assert!((c - 0.625).abs() < 1e-15 && (p + 0.0078125).abs() < 1e-15);
        assert_eq!(landau_min(0.0), (0.25, 1.0 / 64.0));
        for w2 in [0.0, 0.3, 0.6, 0.9] {
            let (c, p) = landau_min(w2);
            assert!((landau_p(w2, c) - p).abs() < 1e-15);
            assert!(landau_p(w2, c * 1.01) >= p && landau_p(w2, c * 0.99) >= p);
        }
    }

    #[test]
    fn spectral_gap_examples() {
        let w = make_potential(&ModelParams::DoiOnsager, 128).unwrap();
        let g = lambda_star(&w, 3.0 * PI / 8.0).unwrap();
        assert!((g.value - 1.0).abs() < 1e-14 && g.mode == 2 && g.certified && !g.supercritical);
        let h = make_potential(&ModelParams::HegselmannKrause { radius: 2.0 }, 64).unwrap();
        let g = lambda_star(&h, 0.0).unwrap();
        assert_eq!((g.value, g.mode), (0.5, 1));
        let ks = k_sharp(&h).unwrap();
        let g = lambda_star(&h, ks.value).unwrap();
        assert!(g.value.abs() < 1e-14 && g.mode == ks.mode && g.supercritical);
    }

    #[test]
    fn k_star_examples() {
        let w = make_potential(&ModelParams::DoiOnsager, 128).unwrap();
        assert!((k_star(&w, 1).unwrap() - 3.0 * PI / 4.0).abs() < 1e-13);
        let t = make_potential(&ModelParams::Transformer { beta: 4.0 }, 64).unwrap();
        assert!(k_star(&t, 0).unwrap() < k_sharp(&t).unwrap().value - 1e-3);
        let g = make_potential(&ModelParams::LogGas, 64).unwrap();
        assert!((k_star(&g, 0).unwrap() - 1.0).abs() < 1e-14);
        for beta in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let t = make_potential(&ModelParams::Transformer { beta }, 64).unwrap();
            let ks = k_star(&t, 0).unwrap();
            let sharp = k_sharp(&t).unwrap().value;
            assert!(ks <= sharp * (1.0 + 1e-14));
            if check_decay(&t, 0).unwrap().pass {
                assert!((ks - sharp).abs() < 1e-12 * sharp);
            }
        }
    }
}
