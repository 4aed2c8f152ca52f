use super::config::{RunConfig, VerifySuite};
use super::output::{collect_manifests, RunDir};
use crate::critical::{find_minimizer, k_star, lambda_star, scan_kc, standard_seeds, Continuity, PhaseDiagram};
use crate::error::{Error, Result};
use crate::fft;
use crate::flow::{fit_rate, integrate, RateModel, GAP_TIME_UNIT};
use crate::inequality::{coercivity_suite, gap_suite};
use crate::particles::chaos_check;
use crate::potentials::{beta_star, check_decay, k_sharp, normalize, r_star, write_coefficients_csv, DecayReport, ModelParams, Potential};
use crate::spectral::Density;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

/// Maximum |z| accepted by the particle consistency check.
pub const Z_MAX: f64 = 3.0;
/// Tolerance on K_c when comparing a scan with the predicted transition.
pub const KC_TOL: f64 = 0.01;
/// Relative tolerance of the subcritical rate against λ_*.
pub const RATE_TOL: f64 = 0.05;
/// Bound on the coercivity defect |term1 + term2 - total|.
pub const DEFECT_TOL: f64 = 1e-9;

/// Result of a command: the run directory, a summary and whether the
/// checked claim held (None when the command checks nothing).
#[derive(Debug)]
pub struct Outcome {
    pub dir: Option<PathBuf>,
    pub summary: serde_json::Value,
    pub agrees: Option<bool>,
}

/// Transition class implied by the decay condition: continuous at K_c = K_#
/// when it holds; discontinuous below K_# for the transformer and
/// Hegselmann–Krause kernels when it fails. Other kernels get no prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub continuity: Option<Continuity>,
    pub k_sharp: f64,
    pub decay: DecayReport,
}

pub fn predict(w: &Potential) -> Result<Prediction> {
    let decay = check_decay(w, w.periodicity())?;
    let continuity = if decay.pass {
        Some(Continuity::Continuous)
    } else if matches!(w.params(), ModelParams::Transformer { .. } | ModelParams::HegselmannKrause { .. }) {
        Some(Continuity::Discontinuous)
    } else {
        None
    };
    Ok(Prediction { continuity, k_sharp: k_sharp(w)?.value, decay })
}

/// Whether a phase diagram agrees with the prediction (None without one).
pub fn agrees(d: &PhaseDiagram, p: &Prediction) -> Option<bool> {
    p.continuity.map(|c| {
        d.continuity == c
            && match c {
                Continuity::Continuous => (d.k_c - p.k_sharp).abs() <= KC_TOL,
                _ => d.k_c < p.k_sharp - KC_TOL,
            }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub model: String,
    pub params: ModelParams,
    pub k_sharp: f64,
    pub k_sharp_mode: usize,
    pub k_sharp_certified: bool,
    pub k_star: Option<f64>,
    pub beta_star: Option<f64>,
    pub r_star: Option<f64>,
    pub periodicity: usize,
    pub decay: DecayReport,
    pub predicted: Option<Continuity>,
}

pub fn thresholds(w: &Potential) -> Result<ThresholdTable> {
    let sharp = k_sharp(w)?;
    let pred = predict(w)?;
    Ok(ThresholdTable {
        model: w.params().name().into(),
        params: w.params().clone(),
        k_sharp: sharp.value,
        k_sharp_mode: sharp.mode,
        k_sharp_certified: sharp.certified,
        k_star: k_star(w, w.periodicity()).ok(),
        beta_star: matches!(w.params(), ModelParams::Transformer { .. }).then(beta_star),
        r_star: matches!(w.params(), ModelParams::HegselmannKrause { .. }).then(r_star),
        periodicity: w.periodicity(),
        decay: pred.decay,
        predicted: pred.continuity,
    })
}

fn log(msg: impl AsRef<str>) {
    eprintln!("[torus-phase] {}", msg.as_ref());
}

fn cosine_start(n: usize, m: usize, a: f64) -> Result<Density> {
    let p = (n + 1) as f64;
    Density::from_grid(fft::grid_nodes(m).iter().map(|t| 1.0 + a * (2.0 * PI * p * t).cos()).collect())
}

fn coupling(cfg: &RunConfig, w: &Potential) -> Result<f64> {
    let spec = cfg.coupling.ok_or_else(|| Error::Config("this command needs a coupling (--K)".into()))?;
    Ok(spec.resolve(k_sharp(w)?.value))
}

pub fn cmd_thresholds(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let w = cfg.potential()?;
    let t = thresholds(&w)?;
    log(format!("model {} (period 1/{})", t.model, t.periodicity + 1));
    log(format!("K_# = {:.10} at mode {} (certified: {})", t.k_sharp, t.k_sharp_mode, t.k_sharp_certified));
    if let Some(k) = t.k_star {
        log(format!("K_* = {k:.10}"));
    }
    if let Some(b) = t.beta_star {
        log(format!("beta_* = {b:.10}"));
    }
    if let Some(r) = t.r_star {
        log(format!("R_* = {r:.10}"));
    }
    log(format!(
        "decay (n = {}): {} (first violation {:?}, min margin {:.3e})",
        t.decay.n,
        if t.decay.pass { "pass" } else { "fail" },
        t.decay.first_violation,
        t.decay.min_margin
    ));
    log(format!("predicted transition: {:?}", t.predicted));
    let mut dir = RunDir::create(&cfg.output_root(), "thresholds", cfg)?;
    dir.write_json("thresholds.json", &t)?;
    dir.write("coefficients.csv", |b| write_coefficients_csv(&w, b))?;
    let summary = serde_json::to_value(&t)?;
    let path = dir.finish(cfg, threads, summary.clone())?;
    Ok(Outcome { dir: Some(path), summary, agrees: None })
}

pub fn cmd_scan(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let w = cfg.potential()?;
    let pred = predict(&w)?;
    let bracket = cfg.bracket.unwrap_or((0.25 * pred.k_sharp, 1.05 * pred.k_sharp));
    log(format!("scanning {} on [{:.6}, {:.6}], M = {}", w.params().name(), bracket.0, bracket.1, cfg.scan.grid_size));
    let d = scan_kc(&w, bracket, &cfg.scan, cfg.exec).map_err(|e| match e {
        Error::BracketNotStraddling { lo, hi, reason } => Error::BracketNotStraddling {
            lo,
            hi,
            reason: format!("{reason}; widen the bracket with --k-min/--k-max or raise the truncation"),
        },
        e => e,
    })?;
    let ok = agrees(&d, &pred);
    log(format!(
        "K_c = {:.6} (K_# = {:.6}), {:?}, jump {:.4}, prediction {:?}, agreement {:?}",
        d.k_c, d.k_sharp, d.continuity, d.jump, pred.continuity, ok
    ));
    let mut dir = RunDir::create(&cfg.output_root(), "scan", cfg)?;
    dir.write("phase_diagram.csv", |b| d.write_csv(b))?;
    let mut verdict = d.verdict();
    verdict["predicted"] = serde_json::to_value(pred.continuity)?;
    verdict["agrees"] = serde_json::to_value(ok)?;
    verdict["coarse_bracket"] = serde_json::json!([d.coarse_bracket.0, d.coarse_bracket.1]);
    verdict["monotonicity_violations"] = d.monotonicity_violations.into();
    dir.write_json("verdict.json", &verdict)?;
    let path = dir.finish(cfg, threads, verdict.clone())?;
    Ok(Outcome { dir: Some(path), summary: verdict, agrees: ok })
}

pub fn cmd_minimize(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let w = cfg.potential()?;
    let k = coupling(cfg, &w)?;
    let mode = k_sharp(&w)?.mode;
    let seeds = standard_seeds(w.periodicity(), cfg.scan.grid_size, cfg.scan.shifted_seeds)?;
    let found = find_minimizer(&w, k, &seeds, &cfg.scan.solve, mode, cfg.exec)?;
    let best = &found.best;
    log(format!(
        "K = {k:.6}: F = {:.3e}, |q̂({mode})| = {:.6}, residual {:.1e}, seed {}, {}/{} converged",
        best.free_energy,
        best.order_parameter(mode),
        best.residual,
        best.seed_id,
        found.converged(),
        seeds.len()
    ));
    let mut dir = RunDir::create(&cfg.output_root(), "minimize", cfg)?;
    dir.write("minimizer.csv", |b| {
        let mut wtr = csv::Writer::from_writer(b);
        wtr.write_record(["theta", "q"])?;
        for (t, v) in best.density.nodes().iter().zip(best.density.grid_values()) {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    let seeds_table: Vec<serde_json::Value> = found
        .reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "seed": r.seed_id, "free_energy": r.free_energy, "residual": r.residual,
                "order_parameter": r.order_parameter(mode), "converged": r.converged,
                "iterations": r.iterations, "newton_iterations": r.newton_iterations,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "K": k, "free_energy": best.free_energy, "order_parameter": best.order_parameter(mode), "mode": mode,
        "residual": best.residual, "seed": best.seed_id, "converged": found.converged(),
        "failures": found.failures.len(),
    });
    dir.write_json("minimizer.json", &serde_json::json!({"best": summary, "seeds": seeds_table, "failures": found.failures}))?;
    let path = dir.finish(cfg, threads, summary.clone())?;
    Ok(Outcome { dir: Some(path), summary, agrees: None })
}

pub fn cmd_flow(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let w = cfg.potential()?;
    let k = coupling(cfg, &w)?;
    let f = &cfg.flow;
    let q0 = cosine_start(w.periodicity(), f.grid_size, f.initial_amplitude)?;
    let trace = integrate(&q0, &w, k, f.horizon, &f.options)?;
    log(format!("integrated to t = {:.4} in {} steps (stationary: {})", trace.records.last().map_or(0.0, |r| r.t), trace.steps, trace.stationary));
    let mut dir = RunDir::create(&cfg.output_root(), "flow", cfg)?;
    dir.write("trace.csv", |b| trace.write_csv(b))?;
    let mut summary = serde_json::json!({"K": k, "steps": trace.steps, "stationary": trace.stationary});
    let mut ok = None;
    if let Some(model) = f.fit {
        let fit = fit_rate(&trace, f.observable, model, f.window)?;
        summary["fit"] = serde_json::to_value(fit)?;
        if model == RateModel::Exponential {
            let gap = lambda_star(&w, k)?;
            let rate = fit.value / GAP_TIME_UNIT;
            let rel = (rate - gap.value).abs() / gap.value.abs();
            log(format!("rate {rate:.6} (gap units) vs λ_* = {:.6}: relative error {rel:.3e}", gap.value));
            summary["rate_gap_units"] = rate.into();
            summary["lambda_star"] = gap.value.into();
            summary["relative_error"] = rel.into();
            if !gap.supercritical {
                ok = Some(rel <= RATE_TOL);
            }
        } else {
            log(format!("algebraic exponent {:.4} on [{:.3e}, {:.3e}]", fit.value, fit.window.0, fit.window.1));
        }
        dir.write_json("fit.json", &summary)?;
    }
    let path = dir.finish(cfg, threads, summary.clone())?;
    Ok(Outcome { dir: Some(path), summary, agrees: ok })
}

pub fn cmd_particles(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let w = cfg.potential()?;
    let k = coupling(cfg, &w)?;
    let p = &cfg.particles;
    let q0 = cosine_start(w.periodicity(), p.grid_size, p.initial_amplitude)?;
    let mut chaos = p.chaos.clone();
    chaos.seed = cfg.seed;
    log(format!("{} replicates of N = {} to T = {} at dt = {:e}", chaos.replicates, chaos.particles, chaos.horizon, chaos.dt));
    let rep = chaos_check(&w, k, &q0, &chaos, cfg.exec)?;
    let ok = rep.consistent(Z_MAX);
    log(format!(
        "mode {}: PDE |q̂| = {:.6}, particles {:.6}, z = {:.3} ({})",
        rep.mode,
        rep.pde_order_parameter,
        rep.particle_order_parameter,
        rep.z,
        if ok { "consistent" } else { "inconsistent" }
    ));
    let mut dir = RunDir::create(&cfg.output_root(), "particles", cfg)?;
    for (r, tr) in rep.traces.iter().enumerate() {
        dir.write(&format!("trace_r{r:02}.csv"), |b| tr.write_csv(b))?;
    }
    dir.write_json("chaos.json", &rep)?;
    let summary = serde_json::json!({"K": k, "mode": rep.mode, "pde": rep.pde_order_parameter, "particles": rep.particle_order_parameter, "z": rep.z, "consistent": ok});
    let path = dir.finish(cfg, threads, summary.clone())?;
    Ok(Outcome { dir: Some(path), summary, agrees: Some(ok) })
}

pub fn cmd_verify(cfg: &RunConfig, threads: usize) -> Result<Outcome> {
    let v = &cfg.verify;
    let mut dir;
    let (summary, ok) = match v.suite {
        VerifySuite::Inequality => {
            let mut opts = v.inequality.clone();
            opts.seed = cfg.seed;
            let rep = gap_suite(&opts, cfg.exec)?;
            for s in &rep.summaries {
                log(format!("{:?} n = {}: {} samples, {} violations, min gap {:.3e}", s.kind, s.n, s.samples, s.violations, s.min));
            }
            dir = RunDir::create(&cfg.output_root(), "verify", cfg)?;
            dir.write_json("gaps.json", &rep)?;
            dir.write("gaps.csv", |b| rep.write_csv(b))?;
            let ok = rep.violations() == 0;
            (serde_json::json!({"suite": "inequality", "violations": rep.violations(), "summaries": rep.summaries}), ok)
        }
        VerifySuite::Coercivity => {
            let w = cfg.potential()?;
            let (wn, _) = normalize(&w, w.periodicity())?;
            let k_max = v.k_max_factor * k_sharp(&wn)?.value;
            let defect = coercivity_suite(&wn, v.pairs, k_max, v.inequality.m, cfg.seed, cfg.exec)?;
            log(format!("coercivity split over {} pairs: max defect {defect:.3e}", v.pairs));
            dir = RunDir::create(&cfg.output_root(), "verify", cfg)?;
            let s = serde_json::json!({"suite": "coercivity", "pairs": v.pairs, "k_max": k_max, "max_defect": defect});
            dir.write_json("coercivity.json", &s)?;
            (s, defect <= DEFECT_TOL)
        }
    };
    let path = dir.finish(cfg, threads, summary.clone())?;
    Ok(Outcome { dir: Some(path), summary, agrees: Some(ok) })
}

/// Collects the manifests below the output root into `report.json` and `report.csv` there.
pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let root = cfg.output_root();
    let runs = collect_manifests(&root)?;
    let rows: Vec<serde_json::Value> = runs
        .iter()
        .map(|(d, m)| {
            serde_json::json!({
                "dir": d.file_name().map(|s| s.to_string_lossy().to_string()),
                "command": m.command, "model": m.config.model.name(), "config_hash": m.config_hash,
                "summary": m.summary,
            })
        })
        .collect();
    for r in &rows {
        println!("{}\t{}\t{}", r["dir"].as_str().unwrap_or(""), r["command"].as_str().unwrap_or(""), r["summary"]);
    }
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join("report.json"), serde_json::to_string_pretty(&rows)?)?;
    let mut wtr = csv::Writer::from_path(root.join("report.csv"))?;
    wtr.write_record(["dir", "command", "model", "config_hash", "summary"])?;
    for r in &rows {
        wtr.write_record([
            r["dir"].as_str().unwrap_or(""),
            r["command"].as_str().unwrap_or(""),
            r["model"].as_str().unwrap_or(""),
            r["config_hash"].as_str().unwrap_or(""),
            &r["summary"].to_string(),
        ])?;
    }
    wtr.flush()?;
    log(format!("{} runs collected under {}", rows.len(), root.display()));
    Ok(Outcome { dir: Some(root), summary: serde_json::json!({"runs": rows.len()}), agrees: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_potential;

    #[test]
    fn predictions_follow_the_decay_condition() {
        let table = |p: ModelParams| thresholds(&make_potential(&p, 256).unwrap()).unwrap();
        let d = table(ModelParams::DoiOnsager);
        assert!((d.k_sharp - 3.0 * PI / 4.0).abs() < 1e-12);
        assert!(d.decay.pass && d.decay.n == 1);
        assert_eq!(d.predicted, Some(Continuity::Continuous));
        let t = table(ModelParams::Transformer { beta: 3.0 });
        assert_eq!(t.decay.first_violation, Some(2));
        assert_eq!(t.predicted, Some(Continuity::Discontinuous));
        assert!(t.beta_star.is_some() && t.r_star.is_none());
        let h = table(ModelParams::HegselmannKrause { radius: 2.5 });
        assert!(h.decay.pass);
        assert_eq!(h.predicted, Some(Continuity::Continuous));
        let c = table(ModelParams::Custom { coeffs: vec![0.5, 0.4] });
        assert_eq!(c.predicted, None);
    }
}
