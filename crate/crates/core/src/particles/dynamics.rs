//! Euler–Maruyama simulation of dθ_i = (K/N) Σ_j W'(θ_i - θ_j) dt + dB_i.

use super::gridding::Gridder;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fft;
use crate::potentials::{wrap, Potential};
use crate::spectral::Density;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Largest admissible Euler–Maruyama step.
pub const MAX_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMode {
    /// O(N²) sum of the closed-form W'.
    PairwiseExact,
    /// O(N·L) evaluation through the empirical Fourier coefficients.
    #[default]
    FourierTruncated,
    /// The truncated Fourier force through B-spline gridding nonuniform
    /// FFTs, O(N + L log L); agrees with `FourierTruncated` to about 1e-9
    /// relative to the force scale.
    FourierGridded,
}

/// N particles on [-1/2, 1/2). Particle i draws its noise from ChaCha8
/// stream i of the state seed, so a trajectory depends only on
/// (seed, i, step) and not on the execution mode.
#[derive(Clone, Debug)]
pub struct ParticleState {
    positions: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    time: f64,
    seed: u64,
    steps: u64,
}

fn stream_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

impl ParticleState {
    pub fn from_positions(positions: &[f64], seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::BadParams("particle system needs N >= 1".into()));
        }
        if let Some(index) = positions.iter().position(|t| !t.is_finite()) {
            return Err(Error::NotFinite { index });
        }
        Ok(Self {
            positions: positions.iter().map(|&t| wrap(t)).collect(),
            rngs: (0..positions.len()).map(|i| stream_rng(seed, i)).collect(),
            time: 0.0,
            seed,
            steps: 0,
        })
    }

    /// N i.i.d. draws from `q0`, read as piecewise constant on the cells
    /// [θ_j - 1/(2M), θ_j + 1/(2M)). Each draw consumes the particle's own stream.
    pub fn sample(q0: &Density, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("particle system needs N >= 1".into()));
        }
        let m = q0.grid_size();
        let h = 1.0 / m as f64;
        let mut cdf = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for v in q0.grid_values() {
            acc += v.max(0.0);
            cdf.push(acc);
        }
        let nodes = fft::grid_nodes(m);
        let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| stream_rng(seed, i)).collect();
        let positions = rngs
            .iter_mut()
            .map(|rng| {
                let u: f64 = rng.random::<f64>() * acc;
                let j = (cdf.partition_point(|c| *c <= u).max(1) - 1).min(m - 1);
                let width = cdf[j + 1] - cdf[j];
                let frac = if width > 0.0 { (u - cdf[j]) / width } else { 0.5 };
                wrap(nodes[j] + (frac - 0.5) * h)
            })
            .collect();
        Ok(Self { positions, rngs, time: 0.0, seed, steps: 0 })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of Euler–Maruyama steps taken, i.e. the noise stream position.
    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// (1/N) Σ_i e^{-2πikθ_i}; exactly 1 for k = 0.
pub fn empirical_fourier(positions: &[f64], k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let s: Complex64 = positions
        .iter()
        .map(|t| {
            let (sin, cos) = (2.0 * PI * k as f64 * t).sin_cos();
            Complex64::new(cos, -sin)
        })
        .sum();
    s / positions.len() as f64
}

/// Empirical coefficients at k = stride·ℓ for ℓ = 1..=count, summed in fixed
/// chunks so the result is identical in every execution mode.
fn empirical_lattice(positions: &[f64], stride: usize, count: usize, exec: Exec) -> Vec<Complex64> {
    let parts = exec.chunked_sum(positions, 2 * count, |_, chunk| {
        let mut acc = vec![0.0; 2 * count];
        for t in chunk {
            let (s, c) = (2.0 * PI * stride as f64 * t).sin_cos();
            let base = Complex64::new(c, -s);
            let mut z = base;
            for l in 0..count {
                acc[2 * l] += z.re;
                acc[2 * l + 1] += z.im;
                z *= base;
            }
        }
        acc
    });
    let n = positions.len() as f64;
    (0..count).map(|l| Complex64::new(parts[2 * l], parts[2 * l + 1]) / n).collect()
}

/// |q̂_N(k)| for k = 1..=kmax.
pub fn empirical_moduli(positions: &[f64], kmax: usize, exec: Exec) -> Vec<f64> {
    empirical_lattice(positions, 1, kmax, exec).iter().map(|c| c.norm()).collect()
}

/// Drift (K/N) Σ_j W'(θ_i - θ_j) of every particle.
pub fn drift(positions: &[f64], w: &Potential, coupling: f64, mode: ForceMode, exec: Exec) -> Result<Vec<f64>> {
    let n = positions.len() as f64;
    match mode {
        ForceMode::PairwiseExact => {
            w.derivative(0.0).ok_or(Error::NoClosedForm)?;
            Ok(exec.map(positions, |&ti| {
                let s: f64 = positions.iter().map(|&tj| w.derivative(ti - tj).unwrap_or(0.0)).sum();
                coupling * s / n
            }))
        }
        ForceMode::FourierTruncated => {
            let stride = w.periodicity() + 1;
            let count = w.truncation() / stride;
            let weights: Vec<f64> = (1..=count).map(|l| (l * stride) as f64 * w.coeff(l * stride)).collect();
            let q = empirical_lattice(positions, stride, count, exec);
            // Σ_j W'(θ_i - θ_j)/N = -4π Σ_k kŴ(k) Im(e^{2πikθ_i} q̂_N(k))
            Ok(exec.map(positions, |&ti| {
                let (s, c) = (2.0 * PI * stride as f64 * ti).sin_cos();
                let base = Complex64::new(c, s);
                let mut z = base;
                let mut acc = 0.0;
                for (a, ql) in weights.iter().zip(&q) {
                    acc += a * (z * ql).im;
                    z *= base;
                }
                -4.0 * PI * coupling * acc
            }))
        }
        ForceMode::FourierGridded => {
            let stride = w.periodicity() + 1;
            let count = w.truncation() / stride;
            let g = Gridder::new(count);
            let stencils = g.stencils(positions, stride, exec);
            let q = g.empirical(&stencils, exec);
            // Im(z) = (z - z̄)/(2i), so the force is a real series with f̂(ℓ) = -i kŴ(k) q̂_N(k) / 2.
            let f: Vec<Complex64> = q
                .iter()
                .enumerate()
                .map(|(i, ql)| {
                    let k = (i + 1) * stride;
                    Complex64::new(0.0, -0.5) * (k as f64 * w.coeff(k)) * ql
                })
                .collect();
            Ok(g.evaluate(&f, &stencils, exec).into_iter().map(|v| -4.0 * PI * coupling * v).collect())
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > MAX_DT {
        return Err(Error::StepTooLarge { dt, bound: MAX_DT });
    }
    Ok(())
}

/// θ_i ← wrap(θ_i + drift_i·dt + √dt·ξ_i) with ξ_i from particle i's stream.
pub fn em_step(state: &mut ParticleState, w: &Potential, coupling: f64, dt: f64, mode: ForceMode, exec: Exec) -> Result<()> {
    check_dt(dt)?;
    let d = drift(&state.positions, w, coupling, mode, exec)?;
    let xi: Vec<f64> = exec.map_mut(&mut state.rngs, |_, rng| rng.sample(StandardNormal));
    let sq = dt.sqrt();
    for ((t, di), x) in state.positions.iter_mut().zip(&d).zip(&xi) {
        *t = wrap(*t + di * dt + sq * x);
    }
    state.time += dt;
    state.steps += 1;
    Ok(())
}

/// Euler–Maruyama step driven by explicit Brownian increments ΔB_i, used
/// for coupled-path refinement studies.
pub fn em_step_with_increments(
    positions: &mut [f64],
    increments: &[f64],
    w: &Potential,
    coupling: f64,
    dt: f64,
    mode: ForceMode,
    exec: Exec,
) -> Result<()> {
    check_dt(dt)?;
    if increments.len() != positions.len() {
        return Err(Error::BadParams(format!("{} increments for {} particles", increments.len(), positions.len())));
    }
    let d = drift(positions, w, coupling, mode, exec)?;
    for ((t, di), db) in positions.iter_mut().zip(&d).zip(increments) {
        *t = wrap(*t + di * dt + db);
    }
    Ok(())
}

/// Empirical mode moduli |q̂_N(1..=kmax)| sampled along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleTrace {
    pub times: Vec<f64>,
    pub moduli: Vec<Vec<f64>>,
}

impl ParticleTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let kmax = self.moduli.first().map_or(0, |r| r.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=kmax).map(|k| format!("abs_mode_{k}")));
        wtr.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.moduli) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    pub dt: f64,
    pub force: ForceMode,
    /// Record every this many steps (0: only the endpoints).
    pub record_every: usize,
    pub kmax: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { dt: MAX_DT, force: ForceMode::FourierTruncated, record_every: 100, kmax: 4 }
    }
}

/// Advances `state` to `horizon` (absolute time), recording mode moduli.
pub fn simulate(
    state: &mut ParticleState,
    w: &Potential,
    coupling: f64,
    horizon: f64,
    opts: &SimulationOptions,
    exec: Exec,
) -> Result<ParticleTrace> {
    check_dt(opts.dt)?;
    let mut trace = ParticleTrace { times: vec![], moduli: vec![] };
    let record = |s: &ParticleState, tr: &mut ParticleTrace| {
        tr.times.push(s.time);
        tr.moduli.push(empirical_moduli(s.positions(), opts.kmax, exec));
    };
    record(state, &mut trace);
    let steps = ((horizon - state.time) / opts.dt).round().max(0.0) as usize;
    for s in 1..=steps {
        em_step(state, w, coupling, opts.dt, opts.force, exec)?;
        if (opts.record_every > 0 && s % opts.record_every == 0) || s == steps {
            if trace.times.last() != Some(&state.time) {
                record(state, &mut trace);
            }
        }
    }
    Ok(trace)
}
