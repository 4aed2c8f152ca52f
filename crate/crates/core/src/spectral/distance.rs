use super::density::Density;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    L2,
    W2Circle,
}

pub fn distance(p: &Density, q: &Density, metric: Metric) -> Result<f64> {
    if p.grid_size() != q.grid_size() {
        return Err(Error::GridMismatch(p.grid_size(), q.grid_size()));
    }
    let m = p.grid_size() as f64;
    let pairs = p.grid_values().iter().zip(q.grid_values());
    Ok(match metric {
        Metric::L1 => pairs.map(|(a, b)| (a - b).abs()).sum::<f64>() / m,
        Metric::L2 => (pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m).sqrt(),
        Metric::W2Circle => w2_circle(p, q),
    })
}

/// Piecewise-linear quantile function of a cellwise-constant density on the
/// lifted line. Cell j covers [θ_j - h/2, θ_j + h/2).
struct Quantile {
    // Knots (t_i, x_i); zero-mass cells produce repeated t (jumps).
    t: Vec<f64>,
    x: Vec<f64>,
}

impl Quantile {
    fn new(q: &Density) -> Self {
        let m = q.grid_size();
        let h = 1.0 / m as f64;
        let total: f64 = q.grid_values().iter().sum();
        let mut t = Vec::with_capacity(m + 1);
        let mut x = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        t.push(0.0);
        x.push(-0.5 - 0.5 * h);
        for (j, v) in q.grid_values().iter().enumerate() {
            acc += v / total;
            t.push(if j + 1 == m { 1.0 } else { acc.min(1.0) });
            x.push(-0.5 - 0.5 * h + (j + 1) as f64 * h);
        }
        Self { t, x }
    }

    /// Linear piece active on the open interval just right of `s` in [0, 1):
    /// returns (slope, intercept) so that F^{-1}(u) = intercept + slope·u.
    fn piece(&self, s: f64) -> (f64, f64) {
        // Last knot index with t <= s, skipping degenerate (jump) segments.
        let mut i = self.t.partition_point(|&ti| ti <= s).saturating_sub(1);
        while i + 1 < self.t.len() && self.t[i + 1] <= self.t[i] {
            i += 1;
        }
        let i = i.min(self.t.len() - 2);
        let dt = self.t[i + 1] - self.t[i];
        let slope = if dt > 0.0 { (self.x[i + 1] - self.x[i]) / dt } else { 0.0 };
        (slope, self.x[i] - slope * self.t[i])
    }

    /// Lifted quantile G^{-1}(s) extended by G^{-1}(s+1) = G^{-1}(s) + 1,
    /// returned as the linear piece valid right of `s`.
    fn lifted_piece(&self, s: f64) -> (f64, f64) {
        let shift = s.floor();
        let (a, b) = self.piece(s - shift);
        // F^{-1}(u) with u = s - shift: b + a(s - shift) + shift.
        (a, b - a * shift + shift)
    }
}

/// ∫_0^1 |F^{-1}(t) - G^{-1}(t + α)|² dt with both quantiles piecewise linear.
fn shifted_cost(f: &Quantile, g: &Quantile, alpha: f64) -> f64 {
    let mut cuts: Vec<f64> = f.t.clone();
    let lo = alpha.floor() as i64 - 1;
    let hi = alpha.ceil() as i64 + 1;
    for k in lo..=hi {
        for &s in &g.t {
            let c = s + k as f64 - alpha;
            if c > 0.0 && c < 1.0 {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (fs, fi) = f.piece(mid);
        let (gs, gi) = g.lifted_piece(mid + alpha);
        // Difference is linear in t on [a, b].
        let d = |t: f64| (fi + fs * t) - (gi + gs * (t + alpha));
        let (d0, d1) = (d(a), d(b));
        total += (b - a) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    total
}

/// Quadratic Wasserstein distance on the circle via the shifted-quantile
/// representation W2² = min_α ∫|F^{-1}(t) - G^{-1}(t+α)|² dt. The cost is
/// convex in α; ternary search on [-1, 1] to 1e-10.
pub fn w2_circle(p: &Density, q: &Density) -> f64 {
    let f = Quantile::new(p);
    let g = Quantile::new(q);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if shifted_cost(&f, &g, m1) <= shifted_cost(&f, &g, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    shifted_cost(&f, &g, 0.5 * (lo + hi)).max(0.0).sqrt()
}
