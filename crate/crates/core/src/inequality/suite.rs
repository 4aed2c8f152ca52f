use super::gaps::{coercivity_split, entropy_seminorm_gap, lebedev_milin_gap, tilted_moment_residual};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fft;
use crate::potentials::Potential;
use crate::spectral::Density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Gaps below -VIOLATION_TOL count as violations.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Random 1/(n+1)-periodic exponent ψ = Σ_{ℓ<=modes} a_ℓ cos(2π(n+1)ℓθ) + b_ℓ sin(2π(n+1)ℓθ)
/// with Σ(|a_ℓ| + |b_ℓ|) = `budget`, sampled on `m` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltSampler {
    pub n: usize,
    pub modes: usize,
    pub budget: f64,
    pub m: usize,
}

impl TiltSampler {
    pub fn exponent(&self, rng: &mut impl Rng) -> Vec<f64> {
        let p = (self.n + 1) as f64;
        let raw: Vec<(f64, f64)> = (0..self.modes)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let total: f64 = raw.iter().map(|(a, b)| a.abs() + b.abs()).sum();
        let scale = self.budget * rng.random::<f64>() / total.max(f64::MIN_POSITIVE);
        fft::grid_nodes(self.m)
            .iter()
            .map(|t| {
                raw.iter()
                    .enumerate()
                    .map(|(l, (a, b))| {
                        let x = 2.0 * PI * p * (l + 1) as f64 * t;
                        scale * (a * x.cos() + b * x.sin())
                    })
                    .sum()
            })
            .collect()
    }

    /// Admissible density e^ψ/Z; positive and 1/(n+1)-periodic by construction.
    pub fn density(&self, rng: &mut impl Rng) -> Result<Density> {
        Density::from_grid(exp_normalized(&self.exponent(rng)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    EntropySeminorm,
    LebedevMilin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub kind: GapKind,
    pub n: usize,
    pub index: usize,
    pub gap: f64,
    /// Off-lattice magnitude (entropy-seminorm) or tilted moment (Lebedev–Milin).
    pub constraint_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub kind: GapKind,
    pub n: usize,
    pub samples: usize,
    pub violations: usize,
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSuiteReport {
    pub seed: u64,
    pub sampler: Vec<TiltSampler>,
    pub summaries: Vec<GapSummary>,
    pub samples: Vec<GapSample>,
}

impl GapSuiteReport {
    pub fn violations(&self) -> usize {
        self.summaries.iter().map(|s| s.violations).sum()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub ns: Vec<usize>,
    pub samples: usize,
    pub m: usize,
    pub modes: usize,
    pub budget: f64,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { ns: vec![0, 1, 2], samples: 500, m: 1024, modes: 6, budget: 3.0, seed: 0 }
    }
}

/// Per-sample generator: stream `index` of the seed derived from (seed, n).
pub fn sample_rng(seed: u64, n: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64 + 1) << 32));
    rng.set_stream(index as u64);
    rng
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(kind: GapKind, n: usize, rows: &[GapSample]) -> GapSummary {
    let mut g: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    g.sort_by(f64::total_cmp);
    GapSummary {
        kind,
        n,
        samples: g.len(),
        violations: g.iter().filter(|v| **v < -VIOLATION_TOL).count(),
        min: g[0],
        q05: quantile(&g, 0.05),
        median: quantile(&g, 0.5),
        q95: quantile(&g, 0.95),
        max: g[g.len() - 1],
    }
}

/// Evaluates both gaps on `samples` random admissible inputs per n. The
/// Lebedev–Milin input is the exponent ψ itself, whose tilted moments
/// 1..=n vanish because e^ψ is 1/(n+1)-periodic.
pub fn gap_suite(opts: &SuiteOptions, exec: Exec) -> Result<GapSuiteReport> {
    if opts.samples == 0 || opts.ns.is_empty() {
        return Err(Error::BadParams("gap suite needs samples and at least one n".into()));
    }
    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    let mut samplers = Vec::new();
    for &n in &opts.ns {
        let sampler = TiltSampler { n, modes: opts.modes, budget: opts.budget, m: opts.m };
        samplers.push(sampler);
        let rows: Vec<Result<(GapSample, GapSample)>> = exec.map_range(opts.samples, |i| {
            let mut rng = sample_rng(opts.seed, n, i);
            let psi = sampler.exponent(&mut rng);
            let q = Density::from_grid(exp_normalized(&psi))?;
            let es = GapSample {
                kind: GapKind::EntropySeminorm,
                n,
                index: i,
                gap: entropy_seminorm_gap(&q, n)?,
                constraint_residual: q.off_lattice_max(n + 1).1,
            };
            let lm = GapSample {
                kind: GapKind::LebedevMilin,
                n,
                index: i,
                gap: lebedev_milin_gap(&psi, n)?,
                constraint_residual: tilted_moment_residual(&psi, n)?.1,
            };
            Ok((es, lm))
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let (es, lm): (Vec<GapSample>, Vec<GapSample>) = rows.into_iter().unzip();
        summaries.push(summarize(GapKind::EntropySeminorm, n, &es));
        summaries.push(summarize(GapKind::LebedevMilin, n, &lm));
        samples.extend(es);
        samples.extend(lm);
    }
    Ok(GapSuiteReport { seed: opts.seed, sampler: samplers, summaries, samples })
}

fn exp_normalized(psi: &[f64]) -> Vec<f64> {
    let top = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = psi.iter().map(|x| (x - top).exp()).collect();
    let z = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x / z).collect()
}

/// Worst decomposition defect |term1 + term2 - total| over `pairs` random
/// (density, coupling) pairs with coupling uniform in [0, k_max].
pub fn coercivity_suite(w: &Potential, pairs: usize, k_max: f64, m: usize, seed: u64, exec: Exec) -> Result<f64> {
    let n = w.periodicity();
    let sampler = TiltSampler { n, modes: 6, budget: 3.0, m };
    let defects: Vec<Result<f64>> = exec.map_range(pairs, |i| {
        let mut rng = sample_rng(seed, n, i);
        let q = sampler.density(&mut rng)?;
        let k = k_max * rng.random::<f64>();
        Ok(coercivity_split(&q, w, k, n)?.defect())
    });
    defects.into_iter().try_fold(0.0, |acc, d| Ok(f64::max(acc, d?)))
}
