//! Pseudospectral ETD-RK2 integrator for
//! ∂_t q = ½∂²q - K∂(q ∂(W*q)) on θ ∈ [-1/2, 1/2).

use crate::error::{Error, Result};
use crate::fft;
use crate::potentials::Potential;
use crate::spectral::{distance, free_energy, Density, Metric};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Linear rates in this time unit are 2π²k²(1 - 2KŴ(k)), i.e. 4π² times
/// the dimensionless gap (k²/2)(1 - 2KŴ(k)).
pub const GAP_TIME_UNIT: f64 = 4.0 * PI * PI;

const BLOW_UP: f64 = 1e6;
const CFL: f64 = 0.2;
/// Early termination threshold on the stationarity residual.
pub const STATIONARY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn heat_rate(k: i64) -> f64 {
    -2.0 * PI * PI * (k * k) as f64
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Transport term -K∂(q ∂(W*q)) in Fourier space together with the
/// largest advection speed |K ∂(W*q)| on the grid. With `dealias`, inputs
/// and output are restricted to |k| <= M/3.
fn transport(spec: &[Complex64], w: &Potential, coupling: f64, dealias: bool) -> (Vec<Complex64>, f64) {
    let m = spec.len();
    let cut = if dealias { m / 3 } else { m / 2 };
    let keep = |i: usize| {
        let k = fft::mode_of(i, m).unsigned_abs() as usize;
        k <= cut && i != m / 2
    };
    let qs: Vec<Complex64> = spec.iter().enumerate().map(|(i, &c)| if keep(i) || (!dealias && i == m / 2) { c } else { ZERO }).collect();
    let us: Vec<Complex64> = qs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if !keep(i) {
                return ZERO;
            }
            let k = fft::mode_of(i, m);
            c * Complex64::new(0.0, 2.0 * PI * k as f64 * w.coeff(k.unsigned_abs() as usize))
        })
        .collect();
    let q = fft::inverse(&qs);
    let u = fft::inverse(&us);
    let speed = u.iter().fold(0.0f64, |a, x| a.max((coupling * x).abs()));
    let prod: Vec<f64> = q.iter().zip(&u).map(|(a, b)| a * b).collect();
    let p = fft::forward(&prod);
    let out = p
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if !keep(i) {
                return ZERO;
            }
            let k = fft::mode_of(i, m);
            -coupling * Complex64::new(0.0, 2.0 * PI * k as f64) * c
        })
        .collect();
    (out, speed)
}

fn check_cfl(speed: f64, m: usize, dt: f64) -> Result<()> {
    let bound = CFL / (m as f64 * speed.max(1e-300));
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    Ok(())
}

/// One Cox–Matthews ETD-RK2 step on a full spectrum. Diffusion is exact; the
/// k = 0 mode is never touched.
fn etd_step(spec: &[Complex64], w: &Potential, coupling: f64, dt: f64) -> Result<Vec<Complex64>> {
    let m = spec.len();
    let (n0, speed) = transport(spec, w, coupling, true);
    check_cfl(speed, m, dt)?;
    let mut a = spec.to_vec();
    for i in 1..m {
        let z = heat_rate(fft::mode_of(i, m)) * dt;
        a[i] = z.exp() * spec[i] + phi1(z) * dt * n0[i];
    }
    let (na, _) = transport(&a, w, coupling, true);
    let mut out = a;
    for i in 1..m {
        let z = heat_rate(fft::mode_of(i, m)) * dt;
        out[i] += phi2(z) * dt * (na[i] - n0[i]);
    }
    Ok(out)
}

fn guard(spec: &[Complex64], t: f64) -> Result<Vec<f64>> {
    let g = fft::inverse(spec);
    if g.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
        return Err(Error::BlowUp { t });
    }
    Ok(g)
}

/// One ETD-RK2 step of the McKean–Vlasov equation.
pub fn mv_step(q: &Density, w: &Potential, coupling: f64, dt: f64) -> Result<Density> {
    let next = etd_step(q.spectrum(), w, coupling, dt)?;
    Density::from_grid(guard(&next, dt)?)
}

fn rhs_norm(spec: &[Complex64], w: &Potential, coupling: f64) -> f64 {
    let m = spec.len();
    let (n, _) = transport(spec, w, coupling, false);
    spec.iter()
        .zip(&n)
        .enumerate()
        .map(|(i, (c, nl))| (heat_rate(fft::mode_of(i, m)) * c + nl).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// L² norm of the right-hand side ½q'' - K(q(W*q)')', evaluated
/// pseudospectrally without dealiasing.
pub fn stationarity_residual(q: &Density, w: &Potential, coupling: f64) -> f64 {
    rhs_norm(q.spectrum(), w, coupling)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordPolicy {
    /// Records at t = 0 and at log-spaced times from `first` on.
    Geometric { first: f64, per_decade: usize },
    /// Records every `every` time units.
    Uniform { every: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowOptions {
    pub dt: f64,
    pub record: RecordPolicy,
    pub tracked_modes: Vec<usize>,
    /// W2 distances are costly; they can be switched off for long runs.
    pub w2: bool,
    pub free_energy: bool,
    /// Keep a density snapshot every this many records (0: first and last only).
    pub snapshot_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            record: RecordPolicy::Geometric { first: 1e-3, per_decade: 40 },
            tracked_modes: vec![1, 2],
            w2: true,
            free_energy: true,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub l2: f64,
    pub w2: Option<f64>,
    pub modes: Vec<f64>,
    pub free_energy: Option<f64>,
    pub mass_defect: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub coupling: f64,
    pub tracked_modes: Vec<usize>,
    pub records: Vec<FlowRecord>,
    pub snapshots: Vec<(f64, Density)>,
    pub stationary: bool,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    L2,
    W2,
    Mode(usize),
    FreeEnergy,
}

impl FlowTrace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Values of an observable; None where it was not recorded.
    pub fn series(&self, obs: Observable) -> Vec<Option<f64>> {
        self.records
            .iter()
            .map(|r| match obs {
                Observable::L2 => Some(r.l2),
                Observable::W2 => r.w2,
                Observable::FreeEnergy => r.free_energy,
                Observable::Mode(k) => self.tracked_modes.iter().position(|&j| j == k).map(|i| r.modes[i]),
            })
            .collect()
    }

    pub fn last(&self) -> &Density {
        &self.snapshots.last().expect("trace always holds the initial snapshot").1
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "l2_dist".into(), "w2_dist".into()];
        header.extend(self.tracked_modes.iter().map(|k| format!("mode_{k}")));
        header.extend(["free_energy".to_string(), "mass_defect".into(), "residual".into()]);
        wtr.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![format!("{:e}", r.t), format!("{:e}", r.l2), opt(r.w2)];
            row.extend(r.modes.iter().map(|x| format!("{x:e}")));
            row.extend([opt(r.free_energy), format!("{:e}", r.mass_defect), format!("{:e}", r.residual)]);
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn record_times(policy: &RecordPolicy, horizon: f64) -> Vec<f64> {
    let mut ts = vec![0.0];
    match *policy {
        RecordPolicy::Geometric { first, per_decade } => {
            let ratio = 10f64.powf(1.0 / per_decade.max(1) as f64);
            let mut t = first;
            while t < horizon {
                ts.push(t);
                t *= ratio;
            }
        }
        RecordPolicy::Uniform { every } => {
            let mut j = 1.0;
            while j * every < horizon {
                ts.push(j * every);
                j += 1.0;
            }
        }
    }
    ts.push(horizon);
    ts
}

fn observe(spec: &[Complex64], t: f64, w: &Potential, coupling: f64, opts: &FlowOptions, uniform: &Density) -> Result<(FlowRecord, Density)> {
    let m = spec.len();
    let q = Density::from_grid(guard(spec, t)?)?;
    let l2 = (1..m).map(|i| spec[i].norm_sqr()).sum::<f64>().sqrt();
    let w2 = if opts.w2 { Some(distance(&q, uniform, Metric::W2Circle)?) } else { None };
    let free_energy = if opts.free_energy { Some(free_energy(&q, w, coupling)?) } else { None };
    let modes = opts
        .tracked_modes
        .iter()
        .map(|&k| if k <= m / 2 { spec[k].norm() } else { 0.0 })
        .collect();
    Ok((
        FlowRecord { t, l2, w2, modes, free_energy, mass_defect: (spec[0].re - 1.0).abs(), residual: rhs_norm(spec, w, coupling) },
        q,
    ))
}

/// Integrates to time `horizon`, recording observables on the policy's
/// schedule (step sizes are shortened to land on record times). Stops early
/// once the stationarity residual falls below [`STATIONARY_TOL`].
pub fn integrate(q0: &Density, w: &Potential, coupling: f64, horizon: f64, opts: &FlowOptions) -> Result<FlowTrace> {
    if !(horizon > 0.0) || !(opts.dt > 0.0) {
        return Err(Error::BadParams("horizon and dt must be positive".into()));
    }
    let m = q0.grid_size();
    let uniform = Density::uniform(m)?;
    let mut spec = q0.spectrum().to_vec();
    let (first, q) = observe(&spec, 0.0, w, coupling, opts, &uniform)?;
    let mut trace = FlowTrace {
        coupling,
        tracked_modes: opts.tracked_modes.clone(),
        records: vec![first],
        snapshots: vec![(0.0, q)],
        stationary: false,
        steps: 0,
    };
    let mut t = 0.0;
    let mut last_q = None;
    for &target in record_times(&opts.record, horizon).iter().skip(1) {
        while t < target - 1e-14 {
            let h = opts.dt.min(target - t);
            spec = etd_step(&spec, w, coupling, h)?;
            t = if target - t <= opts.dt { target } else { t + h };
            trace.steps += 1;
            if trace.steps % 100 == 0 && rhs_norm(&spec, w, coupling) < STATIONARY_TOL {
                trace.stationary = true;
                break;
            }
        }
        let (rec, q) = observe(&spec, t, w, coupling, opts, &uniform)?;
        let stationary = rec.residual < STATIONARY_TOL;
        trace.records.push(rec);
        if opts.snapshot_every > 0 && trace.records.len() % opts.snapshot_every == 0 {
            trace.snapshots.push((t, q.clone()));
        }
        last_q = Some(q);
        if stationary || trace.stationary {
            trace.stationary = true;
            break;
        }
    }
    if let Some(q) = last_q {
        if trace.snapshots.last().map(|s| s.0) != Some(t) {
            trace.snapshots.push((t, q));
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{solve_critical_point, SolveOptions};
    use crate::potentials::{make_potential, normalize, ModelParams};

    fn cosine(m: usize, a: f64, k: f64) -> Density {
        Density::from_grid(fft::grid_nodes(m).iter().map(|t| 1.0 + a * (2.0 * PI * k * t).cos()).collect()).unwrap()
    }

    fn doi_onsager() -> Potential {
        make_potential(&ModelParams::DoiOnsager, 128).unwrap()
    }

    #[test]
    fn uniform_is_stationary() {
        let u = Density::uniform(128).unwrap();
        let w = doi_onsager();
        let next = mv_step(&u, &w, 2.0, 1e-3).unwrap();
        assert!(next.grid_values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(stationarity_residual(&u, &w, 2.0) < 1e-13);
    }

    #[test]
    fn heat_flow_is_exact() {
        let w = doi_onsager();
        let dt = 1e-3;
        let q = mv_step(&cosine(64, 1.0, 1.0), &w, 0.0, dt).unwrap();
        let decay = (-2.0 * PI * PI * dt).exp();
        for (t, v) in fft::grid_nodes(64).iter().zip(q.grid_values()) {
            assert!((v - (1.0 + decay * (2.0 * PI * t).cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_of_pure_heat_part() {
        // DO has no mode-1 coupling: only ½q'' acts, with norm 2π²·0.5·√2.
        let r = stationarity_residual(&cosine(128, 0.5, 1.0), &doi_onsager(), 1.0);
        let expected = 2.0 * PI * PI * 0.5 * 0.5 * 2f64.sqrt();
        assert!((r - expected).abs() < 1e-10, "{r} {expected}");
    }

    #[test]
    fn free_energy_decreases_and_mass_is_exact() {
        let (w, _) = normalize(&make_potential(&ModelParams::DoiOnsager, 128).unwrap(), 1).unwrap();
        let mut q = cosine(256, 0.05, 2.0);
        let mut f = free_energy(&q, &w, 1.2).unwrap();
        for _ in 0..200 {
            q = mv_step(&q, &w, 1.2, 1e-4).unwrap();
            let g = free_energy(&q, &w, 1.2).unwrap();
            assert!(g <= f + 1e-9);
            assert!((q.mass() - 1.0).abs() < 1e-13);
            f = g;
        }
    }

    #[test]
    fn linearized_mode_decay() {
        let w = make_potential(&ModelParams::Transformer { beta: 1.0 }, 64).unwrap();
        let k_coupling = 0.5;
        for k in [1usize, 2] {
            let q0 = cosine(128, 1e-4, k as f64);
            let opts = FlowOptions { record: RecordPolicy::Uniform { every: 0.25 }, tracked_modes: vec![k], w2: false, ..Default::default() };
            let tr = integrate(&q0, &w, k_coupling, 0.05, &opts).unwrap();
            let a = tr.records[0].modes[0];
            let b = tr.records.last().unwrap().modes[0];
            let rate = (a / b).ln() / 0.05 / GAP_TIME_UNIT;
            let gap = 0.5 * (k * k) as f64 * (1.0 - 2.0 * k_coupling * w.coeff(k));
            assert!((rate - gap).abs() < 0.01 * gap, "k={k} {rate} {gap}");
        }
    }

    #[test]
    fn supercritical_flow_reaches_minimizer() {
        let w = doi_onsager();
        let coupling = 1.2 * 3.0 * PI / 4.0;
        let q0 = cosine(256, 0.3, 2.0);
        let opts = FlowOptions { record: RecordPolicy::Uniform { every: 0.05 }, w2: false, dt: 5e-5, ..Default::default() };
        let tr = integrate(&q0, &w, coupling, 6.0, &opts).unwrap();
        let fe: Vec<f64> = tr.series(Observable::FreeEnergy).into_iter().flatten().collect();
        assert!(fe.windows(2).all(|p| p[1] <= p[0] + 1e-9));
        let end = tr.last();
        assert!(tr.records.last().unwrap().residual < 1e-10, "{}", tr.records.last().unwrap().residual);
        let sol = solve_critical_point(&w, coupling, end, &SolveOptions { tol: 1e-12, ..Default::default() }, "flow").unwrap();
        let d = distance(end, &sol.density, Metric::L2).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn dt_refinement_is_second_order() {
        let (w, _) = normalize(&make_potential(&ModelParams::DoiOnsager, 64).unwrap(), 1).unwrap();
        let q0 = cosine(128, 0.5, 2.0);
        let run = |dt: f64| {
            let opts = FlowOptions { dt, record: RecordPolicy::Uniform { every: 1.0 }, w2: false, free_energy: false, ..Default::default() };
            integrate(&q0, &w, 1.5, 0.05, &opts).unwrap().last().clone()
        };
        let (a, b, c) = (run(1e-4), run(5e-5), run(2.5e-5));
        let e1 = distance(&a, &b, Metric::L2).unwrap();
        let e2 = distance(&b, &c, Metric::L2).unwrap();
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.3, "{order}");
    }
}
