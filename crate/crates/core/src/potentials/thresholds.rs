use super::bessel::bessel_i_series;
use super::catalog::Potential;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative slack when comparing coefficients against equality cases such as
/// the log gas, where 2Ŵ(k) = 1/k exactly.
const DECAY_SLACK: f64 = 1e-12;

/// Linear stability threshold of the uniform state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpThreshold {
    pub value: f64,
    pub mode: usize,
    /// True when modes past the truncation provably cannot exceed the maximum.
    pub certified: bool,
}

/// K_# = 1/(2 max_k Ŵ(k)) together with the maximizing mode.
pub fn k_sharp(w: &Potential) -> Result<SharpThreshold> {
    let (mode, max) = w
        .active_modes()
        .map(|k| (k, w.coeff(k)))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if max <= 0.0 {
        return Err(Error::NoAttractivePart);
    }
    let l = w.truncation();
    let beyond = w.moment_envelope(l) / (2.0 * (l + 1) as f64);
    Ok(SharpThreshold {
        value: 0.5 / max,
        mode,
        certified: beyond <= max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub pass: bool,
    pub first_violation: Option<usize>,
    pub checked_up_to: usize,
    /// Modes beyond `checked_up_to` satisfy the condition by the model's
    /// analytic envelope on 2kŴ(k).
    pub tail_certified: bool,
    /// min_k ((n+1)/k - 2Ŵ(k)) over checked modes, in normalized units.
    pub min_margin: f64,
}

/// Checks 2Ŵ(k) <= (n+1)/k for all k after normalizing 2Ŵ(n+1) = 1.
pub fn check_decay(w: &Potential, n: usize) -> Result<DecayReport> {
    let period = n + 1;
    if let Some(mode) = w.active_modes().find(|k| k % period != 0) {
        return Err(Error::PeriodicityMismatch { mode, period });
    }
    let scale = 2.0 * w.coeff(period);
    if scale <= 0.0 {
        return Err(Error::ZeroLeadCoefficient(period));
    }
    let l = w.truncation();
    let mut first_violation = None;
    let mut min_margin = f64::INFINITY;
    for k in 1..=l {
        let bound = period as f64 / k as f64;
        let margin = bound - 2.0 * w.coeff(k) / scale;
        min_margin = min_margin.min(margin);
        if margin < -DECAY_SLACK * bound && first_violation.is_none() {
            first_violation = Some(k);
        }
    }
    let tail_certified = w.moment_envelope(l) / scale <= period as f64 * (1.0 + DECAY_SLACK);
    Ok(DecayReport {
        n,
        pass: first_violation.is_none() && tail_certified,
        first_violation,
        checked_up_to: l,
        tail_certified,
        min_margin,
    })
}

/// Rescales so that 2Ŵ(n+1) = 1; returns the potential and scale = 2Ŵ(n+1).
/// Couplings transform as K ↦ K·scale.
pub fn normalize(w: &Potential, n: usize) -> Result<(Potential, f64)> {
    let scale = 2.0 * w.coeff(n + 1);
    if scale <= 0.0 {
        return Err(Error::ZeroLeadCoefficient(n + 1));
    }
    Ok((w.scaled(1.0 / scale), scale))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "bracket must straddle a sign change");
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unique β > 0 with I_2(β) = I_1(β)/2; above it the transformer kernel
/// violates the decay condition at mode 2.
pub fn beta_star() -> f64 {
    bisect(|b| bessel_i_series(2, b) - 0.5 * bessel_i_series(1, b), 2.4, 2.5)
}

/// Unique zero of R - sin R (2 - cos R) in (0, π).
pub fn r_star() -> f64 {
    bisect(|r| r - r.sin() * (2.0 - r.cos()), 2.1, 2.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_potential, ModelParams};
    use std::f64::consts::PI;

    #[test]
    fn thresholds_in_range() {
        let b = beta_star();
        assert!(b > 2.4 && b < 2.5 && (b - 2.447).abs() < 5e-4, "{b}");
        assert!((bessel_i_series(2, b) - 0.5 * bessel_i_series(1, b)).abs() < 1e-10);
        let r = r_star();
        assert!(r > 2.1 && r < 2.2 && (r - 2.139).abs() < 5e-4, "{r}");
        assert!((r - r.sin() * (2.0 - r.cos())).abs() < 1e-10);
    }

    #[test]
    fn k_sharp_examples() {
        let w = make_potential(&ModelParams::DoiOnsager, 64).unwrap();
        let s = k_sharp(&w).unwrap();
        assert!((s.value - 3.0 * PI / 4.0).abs() < 1e-14 && s.mode == 2 && s.certified);
        let w = make_potential(&ModelParams::Transformer { beta: 2.0 }, 64).unwrap();
        let s = k_sharp(&w).unwrap();
        assert!((s.value - 2.0 / (2.0 * bessel_i_series(1, 2.0))).abs() < 1e-13 && s.mode == 1);
        let w = make_potential(&ModelParams::HegselmannKrause { radius: 2.5 }, 64).unwrap();
        let s = k_sharp(&w).unwrap();
        let closed = PI / (4.0 * (2.5 - 2.5f64.sin()));
        assert!((s.value - closed).abs() < 1e-13 && s.mode == 1);
        assert!((closed - 0.4130).abs() < 5e-5);
    }

    #[test]
    fn decay_examples() {
        let w = make_potential(&ModelParams::DoiOnsager, 128).unwrap();
        let r = check_decay(&w, 1).unwrap();
        assert!(r.pass && r.tail_certified);
        let w = make_potential(&ModelParams::Transformer { beta: 3.0 }, 64).unwrap();
        assert_eq!(check_decay(&w, 0).unwrap().first_violation, Some(2));
        let w = make_potential(&ModelParams::LogGas, 64).unwrap();
        let r = check_decay(&w, 0).unwrap();
        assert!(r.pass && r.min_margin.abs() < 1e-15);
        let w = make_potential(&ModelParams::HegselmannKrause { radius: 1.0 }, 64).unwrap();
        assert_eq!(check_decay(&w, 0).unwrap().first_violation, Some(2));
        let w = make_potential(&ModelParams::Transformer { beta: 1.0 }, 64).unwrap();
        assert!(matches!(check_decay(&w, 1), Err(Error::PeriodicityMismatch { mode: 1, period: 2 })));
    }

    #[test]
    fn normalize_examples() {
        let w = make_potential(&ModelParams::DoiOnsager, 64).unwrap();
        let (wn, s) = normalize(&w, 1).unwrap();
        assert!((s - 4.0 / (3.0 * PI)).abs() < 1e-15);
        assert!((k_sharp(&wn).unwrap().value - 1.0).abs() < 1e-12);
        let (_, s) = normalize(&make_potential(&ModelParams::LogGas, 64).unwrap(), 0).unwrap();
        assert_eq!(s, 1.0);
        let c = make_potential(&ModelParams::Custom { coeffs: vec![0.5] }, 1).unwrap();
        let (cn, s) = normalize(&c, 0).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(cn.coeffs(), c.coeffs());
        assert!(matches!(normalize(&w, 0), Err(Error::ZeroLeadCoefficient(1))));
    }

    #[test]
    fn bessel_coefficients_decay() {
        for beta in [0.5, 1.0, 2.0, beta_star()] {
            let i1 = bessel_i_series(1, beta);
            for l in 1..=30 {
                let il = bessel_i_series(l, beta);
                assert!(il <= i1 / l as f64 * (1.0 + 1e-12), "β={beta} ℓ={l}");
                if l >= 3 {
                    assert!(il < i1 / l as f64);
                }
            }
        }
    }

    #[test]
    fn hk_monotone_and_decay() {
        for j in 1..=100 {
            let r = PI * j as f64 / 100.0;
            let w = make_potential(&ModelParams::HegselmannKrause { radius: r }, 64).unwrap();
            assert!((1..=50).all(|l| w.coeff(l) <= w.coeff(1)), "R={r}");
        }
        for r in [r_star(), 2.5, 3.0] {
            let w = make_potential(&ModelParams::HegselmannKrause { radius: r }, 64).unwrap();
            for l in 1..=50 {
                assert!(w.coeff(l) <= w.coeff(1) / l as f64 * (1.0 + 1e-9), "R={r} ℓ={l}");
                if l >= 3 {
                    assert!(w.coeff(l) < w.coeff(1) / l as f64);
                }
            }
            assert!(check_decay(&w, 0).unwrap().pass, "R={r}");
        }
    }
}
