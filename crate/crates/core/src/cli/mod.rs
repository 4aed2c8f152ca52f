//! Command-line runner: configuration, verbs and run directories.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration or usage error,
//! 3 the run finished but its check failed (scan disagreeing with the
//! predicted transition, particle z-score above 3, inequality violations,
//! subcritical rate off by more than 5%). `--no-assert` maps 3 to 0.

mod commands;
mod config;
mod output;

pub use commands::{
    agrees, cmd_flow, cmd_minimize, cmd_particles, cmd_report, cmd_scan, cmd_thresholds, cmd_verify, predict, thresholds,
    Outcome, Prediction, ThresholdTable, DEFECT_TOL, KC_TOL, RATE_TOL, Z_MAX,
};
pub use config::{
    CouplingSpec, FlowConfig, ParticleConfig, RunConfig, VerifyConfig, VerifySuite, DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV,
};
pub use output::{collect_manifests, config_hash, Manifest, RunDir, MANIFEST};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flow::{Observable, RateModel};
use crate::particles::ForceMode;
use crate::potentials::ModelParams;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "torus-phase", version, about = "Phase transitions of mean-field free energies on the circle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root (default: $TORUS_PHASE_OUT, else ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run every batch sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Exit 0 even when the run's check fails.
    #[arg(long, global = true)]
    pub no_assert: bool,
    /// Number of kernel Fourier modes.
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    #[value(alias = "do")]
    DoiOnsager,
    Transformer,
    #[value(alias = "hk")]
    HegselmannKrause,
    LogGas,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Interaction model (default: the config's, else doi_onsager).
    #[arg(value_enum)]
    pub model: Option<ModelName>,
    /// Transformer inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Hegselmann–Krause confidence radius.
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct CouplingArg {
    /// Coupling: a number, a multiple of K_# such as `1.2x`, or `supercritical` / `subcritical`.
    #[arg(long = "K", alias = "coupling")]
    pub coupling: Option<CouplingSpec>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// K_#, K_*, β_* or R_*, decay check and predicted transition class.
    Thresholds {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Locate K_c and classify the transition.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        tol_k: Option<f64>,
        /// Grid size M.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Global minimizer search at one coupling.
    Minimize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        coupling: CouplingArg,
        #[arg(long)]
        m: Option<usize>,
    },
    /// McKean–Vlasov gradient flow with an optional rate fit.
    Flow {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        coupling: CouplingArg,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_enum)]
        fit: Option<FitArg>,
        #[arg(long, value_enum)]
        observable: Option<ObservableArg>,
    },
    /// Particle system against the mean-field PDE.
    Particles {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        coupling: CouplingArg,
        #[arg(long = "N")]
        particles: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum)]
        force: Option<ForceArg>,
    },
    /// Randomized inequality or coercivity suites.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "inequality")]
        suite: SuiteArg,
        #[arg(long, num_args = 1..)]
        n: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Summarize every run below the output root.
    Report,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FitArg {
    Exponential,
    Algebraic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObservableArg {
    L2,
    W2,
    FreeEnergy,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ForceArg {
    PairwiseExact,
    FourierTruncated,
    FourierGridded,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteArg {
    Inequality,
    Coercivity,
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) -> Result<()> {
    if let Some(name) = m.model {
        cfg.model = match name {
            ModelName::DoiOnsager => ModelParams::DoiOnsager,
            ModelName::Transformer => ModelParams::Transformer { beta: m.beta.unwrap_or(1.0) },
            ModelName::HegselmannKrause => ModelParams::HegselmannKrause { radius: m.radius.unwrap_or(1.0) },
            ModelName::LogGas => ModelParams::LogGas,
        };
    }
    match (&mut cfg.model, m.beta, m.radius) {
        (ModelParams::Transformer { beta }, Some(b), _) => *beta = b,
        (ModelParams::HegselmannKrause { radius }, _, Some(r)) => *radius = r,
        (_, None, None) => {}
        (model, _, _) => return Err(Error::Config(format!("--beta/--R do not apply to {}", model.name()))),
    }
    Ok(())
}

/// Resolves the run configuration: defaults, then the config file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &g.out {
        cfg.output_root = Some(o.clone());
    }
    if let Some(t) = g.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.sequential {
        cfg.exec = Exec::Sequential;
    }
    if let Some(t) = g.truncation {
        cfg.truncation = t;
    }
    match &cli.command {
        Command::Thresholds { model } => apply_model(&mut cfg, model)?,
        Command::Scan { model, k_min, k_max, tol_k, m } => {
            apply_model(&mut cfg, model)?;
            match (k_min, k_max) {
                (Some(lo), Some(hi)) => cfg.bracket = Some((*lo, *hi)),
                (None, None) => {}
                _ => return Err(Error::Config("--k-min and --k-max go together".into())),
            }
            if let Some(t) = tol_k {
                cfg.scan.tol_k = *t;
            }
            if let Some(m) = m {
                cfg.scan.grid_size = *m;
            }
        }
        Command::Minimize { model, coupling, m } => {
            apply_model(&mut cfg, model)?;
            cfg.coupling = coupling.coupling.or(cfg.coupling);
            if let Some(m) = m {
                cfg.scan.grid_size = *m;
            }
        }
        Command::Flow { model, coupling, horizon, dt, m, fit, observable } => {
            apply_model(&mut cfg, model)?;
            cfg.coupling = coupling.coupling.or(cfg.coupling);
            let f = &mut cfg.flow;
            if let Some(h) = horizon {
                f.horizon = *h;
            }
            if let Some(dt) = dt {
                f.options.dt = *dt;
            }
            if let Some(m) = m {
                f.grid_size = *m;
            }
            if let Some(fit) = fit {
                f.fit = Some(match fit {
                    FitArg::Exponential => RateModel::Exponential,
                    FitArg::Algebraic => RateModel::Algebraic,
                });
            }
            if let Some(o) = observable {
                f.observable = match o {
                    ObservableArg::L2 => Observable::L2,
                    ObservableArg::W2 => Observable::W2,
                    ObservableArg::FreeEnergy => Observable::FreeEnergy,
                };
            }
            if f.observable == Observable::W2 {
                f.options.w2 = true;
            }
        }
        Command::Particles { model, coupling, particles, replicates, horizon, dt, force } => {
            apply_model(&mut cfg, model)?;
            cfg.coupling = coupling.coupling.or(cfg.coupling);
            let c = &mut cfg.particles.chaos;
            if let Some(n) = particles {
                c.particles = *n;
            }
            if let Some(r) = replicates {
                c.replicates = *r;
            }
            if let Some(h) = horizon {
                c.horizon = *h;
            }
            if let Some(dt) = dt {
                c.dt = *dt;
            }
            if let Some(f) = force {
                c.force = match f {
                    ForceArg::PairwiseExact => ForceMode::PairwiseExact,
                    ForceArg::FourierTruncated => ForceMode::FourierTruncated,
                    ForceArg::FourierGridded => ForceMode::FourierGridded,
                };
            }
        }
        Command::Verify { model, suite, n, samples } => {
            apply_model(&mut cfg, model)?;
            cfg.verify.suite = match suite {
                SuiteArg::Inequality => VerifySuite::Inequality,
                SuiteArg::Coercivity => VerifySuite::Coercivity,
            };
            if let Some(n) = n {
                cfg.verify.inequality.ns = n.clone();
            }
            if let Some(s) = samples {
                cfg.verify.inequality.samples = *s;
                cfg.verify.pairs = *s;
            }
        }
        Command::Report => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_budget(cfg: &RunConfig) -> Result<usize> {
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = cfg.threads {
            // A pool built earlier in the same process is kept.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        Ok(if cfg.exec.is_parallel() { rayon::current_num_threads() } else { 1 })
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cfg;
        Ok(1)
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = thread_budget(&cfg).and_then(|threads| match cli.command {
        Command::Thresholds { .. } => cmd_thresholds(&cfg, threads),
        Command::Scan { .. } => cmd_scan(&cfg, threads),
        Command::Minimize { .. } => cmd_minimize(&cfg, threads),
        Command::Flow { .. } => cmd_flow(&cfg, threads),
        Command::Particles { .. } => cmd_particles(&cfg, threads),
        Command::Verify { .. } => cmd_verify(&cfg, threads),
        Command::Report => cmd_report(&cfg),
    });
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            if let Some(d) = &o.dir {
                eprintln!("[torus-phase] output: {}", d.display());
            }
            match o.agrees {
                Some(false) if !cli.global.no_assert => EXIT_CHECK_FAILED,
                _ => EXIT_OK,
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
