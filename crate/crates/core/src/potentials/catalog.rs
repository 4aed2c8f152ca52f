use super::bessel::{bessel_i_sequence, MAX_ARGUMENT};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Interaction models. Custom kernels give Ŵ(1), Ŵ(2), ... as a finite list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    DoiOnsager,
    Transformer { beta: f64 },
    HegselmannKrause { radius: f64 },
    LogGas,
    Custom { coeffs: Vec<f64> },
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Transformer { beta } if !(*beta > 0.0 && *beta <= MAX_ARGUMENT) => {
                Err(Error::BadParams(format!("transformer needs 0 < beta <= {MAX_ARGUMENT}, got {beta}")))
            }
            ModelParams::HegselmannKrause { radius } if !(*radius > 0.0 && *radius <= PI) => {
                Err(Error::BadParams(format!("Hegselmann-Krause needs R in (0, pi], got {radius}")))
            }
            ModelParams::Custom { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::BadParams("custom coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::DoiOnsager => "doi_onsager",
            ModelParams::Transformer { .. } => "transformer",
            ModelParams::HegselmannKrause { .. } => "hegselmann_krause",
            ModelParams::LogGas => "log_gas",
            ModelParams::Custom { .. } => "custom",
        }
    }

    /// Exact Ŵ(k) for k >= 1 (before any rescaling).
    fn law(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            ModelParams::DoiOnsager => {
                if k % 2 == 1 {
                    0.0
                } else {
                    let l = (k / 2) as f64;
                    (2.0 / PI) / (4.0 * l * l - 1.0)
                }
            }
            ModelParams::HegselmannKrause { radius } => {
                let x = kf * radius;
                // x - sin x loses digits for small x; use its series there.
                let g = if x < 1e-2 {
                    let x3 = x * x * x;
                    x3 / 6.0 - x3 * x * x / 120.0 + x3 * x3 * x / 5040.0
                } else {
                    x - x.sin()
                };
                2.0 / (PI * kf * kf * kf) * g
            }
            ModelParams::LogGas => 0.5 / kf,
            ModelParams::Custom { coeffs } => coeffs.get(k - 1).copied().unwrap_or(0.0),
            ModelParams::Transformer { .. } => unreachable!("transformer coefficients come from a Bessel sequence"),
        }
    }
}

/// Even, zero-mean kernel W(θ) = 2 Σ_{k>=1} Ŵ(k) cos(2πkθ), truncated at
/// `truncation` modes, possibly rescaled by a positive factor.
#[derive(Clone, Debug)]
pub struct Potential {
    params: ModelParams,
    coeffs: Vec<f64>,
    truncation: usize,
    period: usize,
    factor: f64,
}

/// Builds the catalog potential with modes 1..=`truncation`.
pub fn make_potential(params: &ModelParams, truncation: usize) -> Result<Potential> {
    params.validate()?;
    if truncation == 0 {
        return Err(Error::BadParams("truncation must be positive".into()));
    }
    let mut coeffs = vec![0.0; truncation + 1];
    match params {
        ModelParams::Transformer { beta } => {
            let seq = bessel_i_sequence(truncation, *beta)?;
            for k in 1..=truncation {
                coeffs[k] = seq[k] / beta;
            }
        }
        _ => {
            for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
                *c = params.law(k);
            }
        }
    }
    let period = detect_period(&coeffs);
    if !coeffs.iter().any(|&c| c > 0.0) {
        return Err(Error::NoAttractivePart);
    }
    let w = Potential {
        params: params.clone(),
        coeffs,
        truncation,
        period,
        factor: 1.0,
    };
    let n = w.periodicity();
    if truncation < 4 * (n + 1) && !matches!(params, ModelParams::Custom { .. }) {
        return Err(Error::BadParams(format!(
            "truncation {truncation} must be at least 4(n+1) = {}",
            4 * (n + 1)
        )));
    }
    Ok(w)
}

/// Largest p such that every active mode is a multiple of p.
fn detect_period(coeffs: &[f64]) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| **c != 0.0)
        .fold(0, |g, (k, _)| gcd(g, k))
        .max(1)
}

impl Potential {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Ŵ(k) for k >= 0 (symmetric in sign); zero for k = 0 and beyond truncation.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Coefficients Ŵ(0..=truncation).
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multiplicative factor relative to the catalog kernel.
    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Smallest n >= 0 with every active mode a multiple of n+1.
    pub fn periodicity(&self) -> usize {
        self.period - 1
    }

    pub fn active_modes(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.truncation).filter(move |&k| self.coeffs[k] != 0.0)
    }

    /// Same kernel multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Potential {
        let mut w = self.clone();
        for c in w.coeffs.iter_mut() {
            *c *= s;
        }
        w.factor *= s;
        w
    }

    /// Same kernel with a different truncation.
    pub fn retruncated(&self, truncation: usize) -> Result<Potential> {
        Ok(make_potential(&self.params, truncation)?.scaled(self.factor))
    }

    /// Upper bound on Σ_{k>L} |Ŵ(k)| for the untruncated kernel.
    pub fn tail_bound(&self, l: usize) -> f64 {
        let lf = l.max(1) as f64;
        let raw = match &self.params {
            // (2/π)Σ_{ℓ>L'} 1/(4ℓ²-1) telescopes to 1/(π(2L'+1)) <= 1/(2πL') with L' = ⌊L/2⌋.
            ModelParams::DoiOnsager => 1.0 / (PI * (2.0 * (l / 2) as f64 + 1.0)),
            ModelParams::HegselmannKrause { radius } => 4.0 * radius / (PI * lf),
            ModelParams::Transformer { beta } => {
                // I_{k+1}/I_k <= β/(2(k+1)): geometric tail past L+1.
                let head = bessel_i_sequence(l + 1, *beta).map(|s| s[l + 1]).unwrap_or(0.0) / beta;
                let r = beta / (2.0 * (l + 2) as f64);
                // The absolute floor absorbs subnormal rounding deep in the tail.
                if r < 1.0 {
                    head / (1.0 - r) + 1e-300
                } else {
                    f64::INFINITY
                }
            }
            ModelParams::LogGas => f64::INFINITY,
            ModelParams::Custom { coeffs } => coeffs.iter().skip(l).map(|c| c.abs()).sum(),
        };
        raw * self.factor
    }

    /// Upper bound on sup_{k>L} 2k·max(Ŵ(k), 0); certifies decay-type
    /// conditions 2Ŵ(k) <= c/k beyond the checked range.
    pub fn moment_envelope(&self, l: usize) -> f64 {
        let raw = match &self.params {
            ModelParams::DoiOnsager => {
                // 2kŴ(k) = (8ℓ/π)/(4ℓ²-1) at k = 2ℓ, decreasing in ℓ.
                let lmin = (l / 2 + 1) as f64;
                (8.0 * lmin / PI) / (4.0 * lmin * lmin - 1.0)
            }
            ModelParams::HegselmannKrause { radius } => {
                let k = (l + 1) as f64;
                (4.0 / PI) * (radius / k + 1.0 / (k * k))
            }
            ModelParams::Transformer { beta } => {
                // (k+1)I_{k+1}/(k I_k) <= β/(2k), so k I_k(β) is nonincreasing for k >= β/2.
                let k0 = (l + 1).max((beta / 2.0).ceil() as usize + 1);
                let seq = bessel_i_sequence(k0, *beta).unwrap_or_else(|_| vec![f64::INFINITY; k0 + 1]);
                (l + 1..=k0).map(|k| 2.0 * k as f64 * seq[k] / beta).fold(0.0, f64::max) + 1e-300
            }
            ModelParams::LogGas => 1.0,
            ModelParams::Custom { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(l)
                .map(|(i, c)| 2.0 * (i + 1) as f64 * c.max(0.0))
                .fold(0.0, f64::max),
        };
        raw * self.factor
    }

    /// Closed-form W(θ) (zero-mean convention) where available.
    pub fn eval(&self, theta: f64) -> Option<f64> {
        let t = wrap(theta);
        let raw = match &self.params {
            ModelParams::DoiOnsager => -(2.0 * PI * t).sin().abs() + 2.0 / PI,
            ModelParams::Transformer { beta } => {
                let i0 = super::bessel::bessel_i_series(0, *beta);
                ((beta * (2.0 * PI * t).cos()).exp() - i0) / beta
            }
            ModelParams::HegselmannKrause { radius } => {
                let s = (radius - 2.0 * PI * t.abs()).max(0.0);
                s * s - radius.powi(3) / (3.0 * PI)
            }
            ModelParams::LogGas | ModelParams::Custom { .. } => return None,
        };
        Some(raw * self.factor)
    }

    /// Closed-form W′(θ). At kinks the symmetric value is used: 0 for
    /// Doi–Onsager at θ ∈ {0, ±1/2} and for Hegselmann–Krause at θ = 0.
    pub fn derivative(&self, theta: f64) -> Option<f64> {
        let t = wrap(theta);
        let raw = match &self.params {
            ModelParams::DoiOnsager => {
                // sign(sin 2πt) = sign(t) on (-1/2, 1/2); both kinks get 0.
                let sgn = if t > 0.0 {
                    1.0
                } else if t < 0.0 && t > -0.5 {
                    -1.0
                } else {
                    0.0
                };
                -2.0 * PI * (2.0 * PI * t).cos() * sgn
            }
            ModelParams::Transformer { beta } => {
                -2.0 * PI * (2.0 * PI * t).sin() * (beta * (2.0 * PI * t).cos()).exp()
            }
            ModelParams::HegselmannKrause { radius } => {
                let s = (radius - 2.0 * PI * t.abs()).max(0.0);
                let sgn = if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                -4.0 * PI * s * sgn
            }
            ModelParams::LogGas | ModelParams::Custom { .. } => return None,
        };
        Some(raw * self.factor)
    }

    /// Truncated Fourier sum 2 Σ_{k<=L} Ŵ(k) cos(2πkθ).
    pub fn eval_fourier(&self, theta: f64) -> f64 {
        self.active_modes()
            .map(|k| 2.0 * self.coeffs[k] * (2.0 * PI * k as f64 * theta).cos())
            .sum()
    }

    /// Truncated Fourier derivative -4π Σ_{k<=L} kŴ(k) sin(2πkθ).
    pub fn derivative_fourier(&self, theta: f64) -> f64 {
        self.active_modes()
            .map(|k| -4.0 * PI * k as f64 * self.coeffs[k] * (2.0 * PI * k as f64 * theta).sin())
            .sum()
    }

    pub fn to_spec(&self) -> PotentialSpec {
        PotentialSpec {
            params: self.params.clone(),
            truncation: self.truncation,
            factor: self.factor,
        }
    }
}

/// Reduces θ to [-1/2, 1/2).
pub fn wrap(theta: f64) -> f64 {
    if (-0.5..0.5).contains(&theta) {
        return theta;
    }
    let t = theta - (theta + 0.5).floor();
    if t >= 0.5 {
        t - 1.0
    } else if t < -0.5 {
        t + 1.0
    } else {
        t
    }
}

/// Potential spec file: `{"model": ..., <params>, "truncation": L}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub params: ModelParams,
    pub truncation: usize,
    #[serde(default = "one")]
    pub factor: f64,
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        Ok(make_potential(&self.params, self.truncation)?.scaled(self.factor))
    }
}
