//! Replicate comparison of the particle system against the mean-field PDE.

use super::dynamics::{em_step, empirical_fourier, empirical_moduli, ForceMode, ParticleState, ParticleTrace};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flow::{integrate, FlowOptions, RecordPolicy};
use crate::potentials::Potential;
use crate::spectral::Density;
use serde::{Deserialize, Serialize};

pub const MIN_PARTICLES: usize = 1000;
/// Default particle step; the Euler–Maruyama bias of the stationary order
/// parameter is roughly linear in dt and must stay below the replicate error.
pub const DEFAULT_DT: f64 = 5e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChaosOptions {
    pub particles: usize,
    pub horizon: f64,
    pub replicates: usize,
    pub dt: f64,
    pub force: ForceMode,
    /// Compared mode; defaults to the kernel's first active mode n+1.
    pub mode: Option<usize>,
    pub seed: u64,
    /// Time step of the PDE reference run.
    pub flow_dt: f64,
    /// Per-replicate trajectory sampling interval in steps (0: no traces).
    pub record_every: usize,
    /// Modes 1..=kmax recorded in the traces.
    pub kmax: usize,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        Self {
            particles: 5000,
            horizon: 5.0,
            replicates: 16,
            dt: DEFAULT_DT,
            force: ForceMode::FourierGridded,
            mode: None,
            seed: 0,
            flow_dt: 5e-5,
            record_every: 0,
            kmax: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub mode: usize,
    pub particles: usize,
    pub replicates: usize,
    pub horizon: f64,
    pub dt: f64,
    pub initial_law: String,
    /// |q̂(k)| of the PDE solution at the horizon.
    pub pde_order_parameter: f64,
    /// Replicate mean of |q̂_N(k)|.
    pub particle_order_parameter: f64,
    /// Per-replicate (N|q̂_N(k)|² - 1)/(N - 1), unbiased for |q̂(k)|² under i.i.d. sampling.
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    /// (mean - |q̂_PDE(k)|²)/std_err.
    pub z: f64,
    #[serde(skip)]
    pub traces: Vec<ParticleTrace>,
}

impl ChaosReport {
    pub fn consistent(&self, z_max: f64) -> bool {
        self.z.abs() <= z_max
    }
}

/// Runs `replicates` independent particle systems started from i.i.d. draws
/// of `q0` and compares the squared order parameter at the horizon with the
/// PDE solution from `q0`.
pub fn chaos_check(w: &Potential, coupling: f64, q0: &Density, opts: &ChaosOptions, exec: Exec) -> Result<ChaosReport> {
    if opts.particles < MIN_PARTICLES {
        return Err(Error::BadParams(format!("chaos check needs N >= {MIN_PARTICLES}, got {}", opts.particles)));
    }
    if opts.replicates < 2 {
        return Err(Error::BadParams("chaos check needs at least two replicates".into()));
    }
    let k = opts.mode.unwrap_or(w.periodicity() + 1);
    let flow_opts = FlowOptions {
        dt: opts.flow_dt,
        record: RecordPolicy::Uniform { every: opts.horizon },
        tracked_modes: vec![k],
        w2: false,
        free_energy: false,
        snapshot_every: 0,
    };
    let pde = integrate(q0, w, coupling, opts.horizon, &flow_opts)?.last().order_parameter(k);

    let steps = (opts.horizon / opts.dt).round() as usize;
    let n = opts.particles as f64;
    let runs: Vec<Result<(f64, f64, ParticleTrace)>> = exec.map_range(opts.replicates, |r| {
        let mut state = ParticleState::sample(q0, opts.particles, opts.seed.wrapping_add(r as u64))?;
        let mut trace = ParticleTrace { times: vec![], moduli: vec![] };
        let record = |s: &ParticleState, tr: &mut ParticleTrace| {
            tr.times.push(s.time());
            tr.moduli.push(empirical_moduli(s.positions(), opts.kmax, Exec::Sequential));
        };
        if opts.record_every > 0 {
            record(&state, &mut trace);
        }
        for s in 1..=steps {
            em_step(&mut state, w, coupling, opts.dt, opts.force, exec)?;
            if opts.record_every > 0 && (s % opts.record_every == 0 || s == steps) && trace.times.last() != Some(&state.time()) {
                record(&state, &mut trace);
            }
        }
        let a = empirical_fourier(state.positions(), k as i64).norm();
        Ok((a, (n * a * a - 1.0) / (n - 1.0), trace))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let r = runs.len() as f64;
    let estimates: Vec<f64> = runs.iter().map(|x| x.1).collect();
    let mean = estimates.iter().sum::<f64>() / r;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let std_err = (var / r).sqrt();
    let diff = mean - pde * pde;
    let z = if std_err > 0.0 {
        diff / std_err
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(ChaosReport {
        mode: k,
        particles: opts.particles,
        replicates: opts.replicates,
        horizon: opts.horizon,
        dt: opts.dt,
        initial_law: "i.i.d. draws from the PDE initial density".into(),
        pde_order_parameter: pde,
        particle_order_parameter: runs.iter().map(|x| x.0).sum::<f64>() / r,
        estimates,
        mean,
        std_err,
        z,
        traces: runs.into_iter().map(|x| x.2).collect(),
    })
}
