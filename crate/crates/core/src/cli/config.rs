use crate::critical::ScanOptions;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flow::{FlowOptions, Observable, RateModel};
use crate::inequality::SuiteOptions;
use crate::particles::ChaosOptions;
use crate::potentials::{make_potential, ModelParams, Potential};
use crate::spectral::check_grid_size;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "TORUS_PHASE_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// A coupling given directly or as a multiple of the linear threshold K_#.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Absolute(f64),
    Relative { times_k_sharp: f64 },
}

impl CouplingSpec {
    pub fn resolve(&self, k_sharp: f64) -> f64 {
        match *self {
            CouplingSpec::Absolute(k) => k,
            CouplingSpec::Relative { times_k_sharp } => times_k_sharp * k_sharp,
        }
    }
}

impl FromStr for CouplingSpec {
    type Err = String;

    /// Accepts `1.178`, `1.2x` (times K_#), `supercritical` (1.2x) and `subcritical` (0.5x).
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "supercritical" => return Ok(CouplingSpec::Relative { times_k_sharp: 1.2 }),
            "subcritical" => return Ok(CouplingSpec::Relative { times_k_sharp: 0.5 }),
            _ => {}
        }
        if let Some(f) = s.strip_suffix('x') {
            let f: f64 = f.parse().map_err(|_| format!("bad coupling multiple {s:?}"))?;
            return Ok(CouplingSpec::Relative { times_k_sharp: f });
        }
        s.parse().map(CouplingSpec::Absolute).map_err(|_| format!("bad coupling {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub grid_size: usize,
    pub horizon: f64,
    /// Initial density 1 + a·cos(2π(n+1)θ).
    pub initial_amplitude: f64,
    pub options: FlowOptions,
    pub fit: Option<RateModel>,
    pub observable: Observable,
    pub window: Option<(f64, f64)>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            grid_size: 256,
            horizon: 1.0,
            initial_amplitude: 0.3,
            options: FlowOptions::default(),
            fit: None,
            observable: Observable::W2,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleConfig {
    /// Grid of the initial density and of the PDE reference run.
    pub grid_size: usize,
    pub initial_amplitude: f64,
    /// Replicate settings; `record_every` > 0 writes one trajectory CSV per replicate.
    pub chaos: ChaosOptions,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            grid_size: 256,
            initial_amplitude: 0.3,
            chaos: ChaosOptions { record_every: 1000, ..Default::default() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifySuite {
    Inequality,
    Coercivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub suite: VerifySuite,
    pub inequality: SuiteOptions,
    /// Random (density, coupling) pairs for the coercivity suite.
    pub pairs: usize,
    /// Couplings are drawn uniformly in [0, k_max_factor·K_#].
    pub k_max_factor: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { suite: VerifySuite::Inequality, inequality: SuiteOptions::default(), pairs: 200, k_max_factor: 2.0 }
    }
}

/// Full run configuration. Every field has a default, so a JSON config file
/// only needs the keys it changes; command-line flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub truncation: usize,
    pub coupling: Option<CouplingSpec>,
    /// Scan bracket; defaults to (0.25 K_#, 1.05 K_#).
    pub bracket: Option<(f64, f64)>,
    pub seed: u64,
    /// Worker threads; None uses all cores.
    pub threads: Option<usize>,
    pub exec: Exec,
    pub output_root: Option<PathBuf>,
    pub scan: ScanOptions,
    pub flow: FlowConfig,
    pub particles: ParticleConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::DoiOnsager,
            truncation: 256,
            coupling: None,
            bracket: None,
            seed: 0,
            threads: None,
            exec: Exec::Parallel,
            output_root: None,
            scan: ScanOptions::default(),
            flow: FlowConfig::default(),
            particles: ParticleConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.truncation == 0 {
            return Err(Error::Config("truncation must be at least 1".into()));
        }
        for m in [self.scan.grid_size, self.flow.grid_size, self.particles.grid_size, self.verify.inequality.m] {
            check_grid_size(m).map_err(|e| Error::Config(e.to_string()))?;
        }
        let s = &self.scan;
        for (name, v) in [
            ("scan.tol_k", s.tol_k),
            ("scan.tol_f", s.tol_f),
            ("scan.refine_rel", s.refine_rel),
            ("scan.refine_tol_f", s.refine_tol_f),
            ("scan.refine_solve_tol", s.refine_solve_tol),
            ("scan.solve.tol", s.solve.tol),
            ("flow.horizon", self.flow.horizon),
            ("flow.options.dt", self.flow.options.dt),
            ("particles.chaos.dt", self.particles.chaos.dt),
            ("particles.chaos.horizon", self.particles.chaos.horizon),
            ("particles.chaos.flow_dt", self.particles.chaos.flow_dt),
        ] {
            positive(name, v)?;
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo < hi) {
                return Err(Error::Config(format!("bracket ({lo}, {hi}) is empty")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        make_potential(&self.model, self.truncation)
    }

    /// Output root: the config value, else $TORUS_PHASE_OUT, else `runs`.
    pub fn output_root(&self) -> PathBuf {
        self.output_root
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.model = ModelParams::Transformer { beta: 1.5 };
        c.coupling = Some(CouplingSpec::Relative { times_k_sharp: 1.2 });
        c.bracket = Some((0.1, 0.9));
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_files_use_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"model": {"model": "hegselmann_krause", "radius": 2.5}, "scan": {"tol_k": 0.01}}"#).unwrap();
        assert_eq!(c.model, ModelParams::HegselmannKrause { radius: 2.5 });
        assert_eq!(c.scan.tol_k, 0.01);
        assert_eq!(c.scan.grid_size, ScanOptions::default().grid_size);
        assert_eq!(c.truncation, 256);
    }

    #[test]
    fn coupling_specs() {
        assert_eq!("1.178".parse::<CouplingSpec>().unwrap(), CouplingSpec::Absolute(1.178));
        assert_eq!("1.2x".parse::<CouplingSpec>().unwrap().resolve(2.0), 2.4);
        assert_eq!("subcritical".parse::<CouplingSpec>().unwrap().resolve(2.0), 1.0);
        assert!("fast".parse::<CouplingSpec>().is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.scan.grid_size = 100;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.flow.options.dt = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
