use super::kirkwood::{solve_critical_point, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fft;
use crate::potentials::Potential;
use crate::spectral::{Density, ExtremalFamily};
use std::f64::consts::PI;

/// Free energies closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct Seed {
    pub label: String,
    pub density: Density,
}

/// Seeds adapted to 1/(n+1)-periodic kernels: the uniform state, cosine
/// perturbations 1 + a·cos(2π(n+1)θ) for a ∈ {0.2, 0.6, 0.95}, the extremal
/// family for c ∈ {0.3, 0.7, 0.95} and a sharp bump (c = 0.99). With
/// `shifted`, every nonuniform seed is repeated at θ₀ = 1/(4(n+1)).
pub fn standard_seeds(n: usize, m: usize, shifted: bool) -> Result<Vec<Seed>> {
    let p = (n + 1) as f64;
    let nodes = fft::grid_nodes(m);
    let mut base: Vec<(String, Box<dyn Fn(f64) -> Result<Density>>)> = Vec::new();
    for a in [0.2, 0.6, 0.95] {
        let nodes = nodes.clone();
        base.push((
            format!("cos_a{a}"),
            Box::new(move |s| Density::from_grid(nodes.iter().map(|t| 1.0 + a * (2.0 * PI * p * (t - s)).cos()).collect())),
        ));
    }
    for c in [0.3, 0.7, 0.95, 0.99] {
        let label = if c == 0.99 { "bump_c0.99".to_string() } else { format!("family_c{c}") };
        base.push((label, Box::new(move |s| ExtremalFamily::new(n, c, s)?.density(m))));
    }
    let mut seeds = vec![Seed { label: "uniform".into(), density: Density::uniform(m)? }];
    for (label, make) in &base {
        seeds.push(Seed { label: label.clone(), density: make(0.0)? });
    }
    if shifted {
        let s = 0.25 / p;
        for (label, make) in &base {
            seeds.push(Seed { label: format!("{label}_shifted"), density: make(s)? });
        }
    }
    Ok(seeds)
}

#[derive(Clone, Debug)]
pub struct MinimizerSearch {
    pub best: SolveReport,
    pub reports: Vec<SolveReport>,
    pub failures: Vec<(String, String)>,
}

impl MinimizerSearch {
    pub fn converged(&self) -> usize {
        self.reports.iter().filter(|r| r.converged).count()
    }
}

/// Lower free energy wins; within [`TIE_TOL`] the smaller order parameter wins.
fn better(a: &SolveReport, b: &SolveReport, mode: usize) -> bool {
    if (a.free_energy - b.free_energy).abs() <= TIE_TOL {
        a.order_parameter(mode) < b.order_parameter(mode)
    } else {
        a.free_energy < b.free_energy
    }
}

/// Multistart search for the global minimizer of F_K. Seeds run
/// independently under `exec`; `mode` is the order-parameter mode used for
/// tie-breaking.
pub fn find_minimizer(w: &Potential, coupling: f64, seeds: &[Seed], opts: &SolveOptions, mode: usize, exec: Exec) -> Result<MinimizerSearch> {
    let results = exec.map(seeds, |s| solve_critical_point(w, coupling, &s.density, opts, &s.label));
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e @ Error::ExpOverflow(_)) => failures.push((seed.label.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let best = reports
        .iter()
        .filter(|r| r.converged)
        .fold(None::<&SolveReport>, |acc, r| match acc {
            Some(b) if !better(r, b, mode) => Some(b),
            _ => Some(r),
        })
        .cloned()
        .ok_or(Error::AllSeedsFailed)?;
    Ok(MinimizerSearch { best, reports, failures })
}
