use super::kirkwood::SolveOptions;
use super::minimize::{find_minimizer, standard_seeds, MinimizerSearch, Seed};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::potentials::{k_sharp, Potential};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    /// Bracket width at which the critical coupling is reported.
    pub tol_k: f64,
    /// Free-energy gap above which a coupling counts as supercritical.
    pub tol_f: f64,
    /// The bracket is refined further to this width relative to K_c before
    /// the order parameter at the upper end is read off as the jump.
    pub refine_rel: f64,
    /// Gap threshold used during refinement. Near a continuous transition
    /// the gap grows like (K - K_c)², so a smaller threshold is needed for
    /// the order parameter at the upper end to approach its limit.
    pub refine_tol_f: f64,
    /// Fixed-point tolerance during refinement.
    pub refine_solve_tol: f64,
    pub continuous_below: f64,
    pub discontinuous_above: f64,
    pub grid_size: usize,
    pub shifted_seeds: bool,
    pub solve: SolveOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            tol_k: 5e-3,
            tol_f: 1e-10,
            refine_rel: 1e-7,
            refine_tol_f: 1e-14,
            refine_solve_tol: 1e-13,
            continuous_below: 0.02,
            discontinuous_above: 0.05,
            grid_size: 512,
            shifted_seeds: true,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "K")]
    pub coupling: f64,
    pub best_gap: f64,
    pub order_parameter: f64,
    pub n_seeds_converged: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    Continuous,
    Discontinuous,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub rows: Vec<ScanRow>,
    /// Midpoint of the refined bracket.
    pub k_c: f64,
    pub bracket: (f64, f64),
    /// Bracket at the end of the coarse bisection (width <= tol_k).
    pub coarse_bracket: (f64, f64),
    pub k_sharp: f64,
    pub order_mode: usize,
    pub continuity: Continuity,
    pub jump: f64,
    /// Adjacent rows whose gap decreases by more than 1e-10 as K grows.
    pub monotonicity_violations: usize,
}

impl PhaseDiagram {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn verdict(&self) -> serde_json::Value {
        serde_json::json!({
            "K_c": self.k_c,
            "bracket": [self.bracket.0, self.bracket.1],
            "K_sharp": self.k_sharp,
            "continuity": self.continuity,
            "jump": self.jump,
        })
    }
}

pub fn classify(jump: f64, opts: &ScanOptions) -> Continuity {
    if jump < opts.continuous_below {
        Continuity::Continuous
    } else if jump > opts.discontinuous_above {
        Continuity::Discontinuous
    } else {
        Continuity::Undetermined
    }
}

struct Scanner<'a> {
    w: &'a Potential,
    seeds: Vec<Seed>,
    solve: SolveOptions,
    mode: usize,
    exec: Exec,
    rows: Vec<ScanRow>,
}

impl Scanner<'_> {
    /// Evaluates one coupling; `warm` adds the last supercritical minimizer as a seed.
    fn eval(&mut self, coupling: f64, warm: Option<&Seed>) -> Result<MinimizerSearch> {
        let mut seeds = self.seeds.clone();
        seeds.extend(warm.cloned());
        let found = find_minimizer(self.w, coupling, &seeds, &self.solve, self.mode, self.exec)?;
        self.rows.push(ScanRow {
            coupling,
            best_gap: -found.best.free_energy.min(0.0),
            order_parameter: found.best.order_parameter(self.mode),
            n_seeds_converged: found.converged(),
        });
        Ok(found)
    }
}

fn warm_seed(found: &MinimizerSearch) -> Seed {
    Seed { label: "continuation".into(), density: found.best.density.clone() }
}

/// Locates K_c in `bracket` by bisection on "best free-energy gap > tol_f",
/// then classifies the transition from the minimizer's order parameter just
/// above K_c.
pub fn scan_kc(w: &Potential, bracket: (f64, f64), opts: &ScanOptions, exec: Exec) -> Result<PhaseDiagram> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::BracketNotStraddling { lo, hi, reason: "lower end must be below upper end".into() });
    }
    let sharp = k_sharp(w)?;
    let mut s = Scanner {
        w,
        seeds: standard_seeds(w.periodicity(), opts.grid_size, opts.shifted_seeds)?,
        solve: opts.solve,
        mode: sharp.mode,
        exec,
        rows: Vec::new(),
    };
    let top = s.eval(hi, None)?;
    if -top.best.free_energy <= opts.tol_f {
        return Err(Error::BracketNotStraddling { lo, hi, reason: "no supercritical minimizer at the upper end".into() });
    }
    let mut upper = top;
    let bottom = s.eval(lo, Some(&warm_seed(&upper)))?;
    if -bottom.best.free_energy > opts.tol_f {
        return Err(Error::BracketNotStraddling { lo, hi, reason: "lower end is already supercritical".into() });
    }
    // Coarse bisection with the standard gap threshold.
    while hi - lo > opts.tol_k {
        let mid = 0.5 * (lo + hi);
        let found = s.eval(mid, Some(&warm_seed(&upper)))?;
        if -found.best.free_energy > opts.tol_f {
            hi = mid;
            upper = found;
        } else {
            lo = mid;
        }
    }
    let coarse = (lo, hi);
    // Refinement with the finer threshold; the lower end is moved down
    // until it is subcritical under that threshold as well.
    s.solve.tol = s.solve.tol.min(opts.refine_solve_tol);
    let fine = opts.tol_f.min(opts.refine_tol_f);
    let step = hi - lo;
    loop {
        let found = s.eval(lo, Some(&warm_seed(&upper)))?;
        if -found.best.free_energy <= fine {
            break;
        }
        hi = lo;
        upper = found;
        lo -= step;
        if lo <= bracket.0 {
            return Err(Error::BracketNotStraddling { lo: bracket.0, hi: bracket.1, reason: "refinement left the bracket".into() });
        }
    }
    while hi - lo > opts.refine_rel * hi {
        let mid = 0.5 * (lo + hi);
        let found = s.eval(mid, Some(&warm_seed(&upper)))?;
        if -found.best.free_energy > fine {
            hi = mid;
            upper = found;
        } else {
            lo = mid;
        }
    }
    let jump = upper.best.order_parameter(s.mode);
    let mut rows = s.rows;
    rows.sort_by(|a, b| a.coupling.total_cmp(&b.coupling));
    let monotonicity_violations = rows.windows(2).filter(|p| p[1].best_gap < p[0].best_gap - 1e-10).count();
    Ok(PhaseDiagram {
        rows,
        k_c: 0.5 * (lo + hi),
        bracket: (lo, hi),
        coarse_bracket: coarse,
        k_sharp: sharp.value,
        order_mode: sharp.mode,
        continuity: classify(jump, opts),
        jump,
        monotonicity_violations,
    })
}

/// Evaluates the minimizer search on a fixed list of couplings; couplings
/// run in parallel under `exec`, seeds within each sequentially.
pub fn scan_grid(w: &Potential, couplings: &[f64], opts: &ScanOptions, exec: Exec) -> Result<Vec<ScanRow>> {
    let mode = k_sharp(w)?.mode;
    let seeds = standard_seeds(w.periodicity(), opts.grid_size, opts.shifted_seeds)?;
    exec.map(couplings, |&k| {
        let found = find_minimizer(w, k, &seeds, &opts.solve, mode, Exec::Sequential)?;
        Ok(ScanRow {
            coupling: k,
            best_gap: -found.best.free_energy.min(0.0),
            order_parameter: found.best.order_parameter(mode),
            n_seeds_converged: found.converged(),
        })
    })
    .into_iter()
    .collect()
}
