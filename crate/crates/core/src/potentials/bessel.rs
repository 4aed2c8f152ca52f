//! Modified Bessel functions of the first kind, I_ℓ(x), for integer order.
//!
//! Small orders use the power series Σ (x/2)^{2k+ℓ}/(k!(k+ℓ)!), whose terms
//! are all positive so the sum is computed to full relative precision.
//! Whole sequences I_0..I_L are produced by Miller's backward recurrence
//! I_{k-1} = I_{k+1} + (2k/x) I_k normalized against the series value of I_0.

use crate::error::{Error, Result};

pub const MAX_ARGUMENT: f64 = 50.0;
/// Orders above this use the backward recurrence rather than the series.
const SERIES_MAX_ORDER: usize = 40;

fn check(order: usize, x: f64) -> Result<()> {
    if !(0.0..=MAX_ARGUMENT).contains(&x) || !x.is_finite() {
        return Err(Error::BesselOverflow { order, x });
    }
    Ok(())
}

/// Power series for I_ℓ(x), summed until the remainder bound drops below
/// machine precision. With t_k the k-th term, t_{k+1}/t_k = (x/2)²/((k+1)(k+ℓ+1))
/// decreases in k, so once the ratio r < 1 the tail is at most t_k·r/(1-r).
pub fn bessel_i_series(order: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // Leading term (x/2)^ℓ/ℓ! in log space to avoid overflow in ℓ!.
    let log_lead = order as f64 * half.ln() - ln_factorial(order);
    let lead = log_lead.exp();
    if lead == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 0..10_000usize {
        let ratio = q / ((k + 1) as f64 * (k + order + 1) as f64);
        term *= ratio;
        sum += term;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= f64::EPSILON * 0.25 * sum {
            break;
        }
    }
    lead * sum
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// I_ℓ(x) for 0 <= x <= 50.
pub fn bessel_i(order: usize, x: f64) -> Result<f64> {
    check(order, x)?;
    if order <= SERIES_MAX_ORDER || x == 0.0 {
        return Ok(bessel_i_series(order, x));
    }
    Ok(bessel_i_sequence(order, x)?[order])
}

/// I_0(x), ..., I_L(x) by Miller's backward recurrence.
pub fn bessel_i_sequence(max_order: usize, x: f64) -> Result<Vec<f64>> {
    check(max_order, x)?;
    if x == 0.0 {
        let mut v = vec![0.0; max_order + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    // Start well beyond both the requested order and the turning point ~x.
    let start = max_order.max(x.ceil() as usize) + 40 + (x.sqrt() * 10.0) as usize;
    let mut vals = vec![0.0f64; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + (2.0 * k as f64 / x) * vals[k];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = bessel_i_series(0, x) / vals[0];
    vals.truncate(max_order + 1);
    for v in vals.iter_mut() {
        *v *= scale;
    }
    Ok(vals)
}
