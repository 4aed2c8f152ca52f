use super::mv::{FlowTrace, Observable};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// obs ≈ C e^{-rate·t}
    Exponential,
    /// obs ≈ C t^{exponent}
    Algebraic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: (f64, f64),
    pub model: RateModel,
    /// Decay rate (exponential, positive for decay) or exponent (algebraic).
    pub value: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_POINTS: usize = 20;
/// Local log-linearity required for automatic window selection.
pub const LOCAL_R2: f64 = 0.999;

/// Least squares y = a + b x; returns (b, R²).
fn regress(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, r2)
}

/// Fits on explicit (t, obs) samples inside `window`.
pub fn fit_samples(t: &[f64], obs: &[f64], model: RateModel, window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(obs)
        .filter(|(ti, _)| **ti >= window.0 && **ti <= window.1)
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::DegenerateWindow(format!("{} points in window, need {MIN_POINTS}", pts.len())));
    }
    if pts.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::DegenerateWindow("observable is not positive on the window".into()));
    }
    if model == RateModel::Algebraic && pts[0].0 <= 0.0 {
        return Err(Error::DegenerateWindow("algebraic fits need t > 0".into()));
    }
    let x: Vec<f64> = pts
        .iter()
        .map(|p| if model == RateModel::Algebraic { p.0.ln() } else { p.0 })
        .collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, r2) = regress(&x, &y);
    Ok(RateFit {
        window: (pts[0].0, pts[pts.len() - 1].0),
        model,
        value: if model == RateModel::Exponential { -slope } else { slope },
        r_squared: r2,
        points: pts.len(),
    })
}

/// Automatic window: the last contiguous run of samples whose surrounding
/// `MIN_POINTS`-sample regressions all have R² > [`LOCAL_R2`].
pub fn auto_window(t: &[f64], obs: &[f64], model: RateModel) -> Result<(f64, f64)> {
    let n = t.len();
    if n < MIN_POINTS {
        return Err(Error::DegenerateWindow(format!("trace has {n} points")));
    }
    let x: Vec<f64> = t.iter().map(|v| if model == RateModel::Algebraic { v.ln() } else { *v }).collect();
    let mut good = vec![false; n - MIN_POINTS + 1];
    for (s, g) in good.iter_mut().enumerate() {
        let seg = s..s + MIN_POINTS;
        if obs[seg.clone()].iter().all(|v| *v > 0.0) && x[seg.clone()].iter().all(|v| v.is_finite()) {
            let y: Vec<f64> = obs[seg.clone()].iter().map(|v| v.ln()).collect();
            *g = regress(&x[seg], &y).1 > LOCAL_R2;
        }
    }
    let end = good.iter().rposition(|g| *g).ok_or_else(|| Error::DegenerateWindow("no locally log-linear segment".into()))?;
    let mut start = end;
    while start > 0 && good[start - 1] {
        start -= 1;
    }
    Ok((t[start], t[end + MIN_POINTS - 1]))
}

/// Fits an observable of a trace; `window = None` selects it automatically.
pub fn fit_rate(trace: &FlowTrace, obs: Observable, model: RateModel, window: Option<(f64, f64)>) -> Result<RateFit> {
    let (t, v): (Vec<f64>, Vec<f64>) = trace
        .times()
        .into_iter()
        .zip(trace.series(obs))
        .filter_map(|(t, v)| v.map(|v| (t, v)))
        .filter(|(t, _)| model == RateModel::Exponential || *t > 0.0)
        .unzip();
    let window = match window {
        Some(w) => w,
        None => auto_window(&t, &v, model)?,
    };
    fit_samples(&t, &v, model, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_exponential() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|s| (-3.0 * s).exp()).collect();
        let fit = fit_samples(&t, &y, RateModel::Exponential, (0.0, 10.0)).unwrap();
        assert!((fit.value - 3.0).abs() < 1e-6 && fit.r_squared > 0.999999);
        let w = auto_window(&t, &y, RateModel::Exponential).unwrap();
        assert_eq!(w, (0.0, t[99]));
    }

    #[test]
    fn synthetic_algebraic_with_transient() {
        let t: Vec<f64> = (0..200).map(|i| 1e-3 * 10f64.powf(i as f64 / 40.0)).collect();
        let y: Vec<f64> = t.iter().map(|s| s.powf(-0.5) + 1.0 / (1.0 + 1e3 * s)).collect();
        let w = auto_window(&t, &y, RateModel::Algebraic).unwrap();
        let fit = fit_samples(&t, &y, RateModel::Algebraic, w).unwrap();
        assert!((fit.value + 0.5).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn degenerate_windows() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![1.0; 10];
        assert!(matches!(fit_samples(&t, &y, RateModel::Exponential, (0.0, 9.0)), Err(Error::DegenerateWindow(_))));
        let t: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut y = vec![1.0; 30];
        y[5] = 0.0;
        assert!(matches!(fit_samples(&t, &y, RateModel::Exponential, (0.0, 29.0)), Err(Error::DegenerateWindow(_))));
    }
}
