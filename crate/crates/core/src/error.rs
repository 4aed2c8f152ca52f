use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is not a power of two (>= 4)")]
    BadGridSize(usize),
    #[error("grid values have non-positive total mass {0}")]
    NonPositiveMass(f64),
    #[error("grid value at index {index} is not finite")]
    NotFinite { index: usize },
    #[error("density value {value} at index {index} is below the clipping floor")]
    NegativeDensity { index: usize, value: f64 },
    #[error("clipped negative mass {0:e} exceeds the allowed budget")]
    PositivityBudgetExceeded(f64),
    #[error("grid sizes differ: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("potential tail bound {bound:e} at truncation {truncation} exceeds tolerance {tol:e}")]
    TruncationTooCoarse { truncation: usize, bound: f64, tol: f64 },
    #[error("invalid model parameters: {0}")]
    BadParams(String),
    #[error("potential has no positive Fourier coefficient")]
    NoAttractivePart,
    #[error("active mode {mode} is not a multiple of {period}")]
    PeriodicityMismatch { mode: usize, period: usize },
    #[error("coefficient of mode {0} is not positive; cannot normalize")]
    ZeroLeadCoefficient(usize),
    #[error("modified Bessel evaluation outside the supported range (order {order}, x = {x})")]
    BesselOverflow { order: usize, x: f64 },
    #[error("exponent 2K|W*q| = {0:.1} would overflow")]
    ExpOverflow(f64),
    #[error("no seed converged")]
    AllSeedsFailed,
    #[error("bracket [{lo}, {hi}] does not straddle the transition: {reason}")]
    BracketNotStraddling { lo: f64, hi: f64, reason: String },
    #[error("flow blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("fit window is degenerate: {0}")]
    DegenerateWindow(String),
    #[error("pairwise force mode needs a closed-form derivative for this kernel")]
    NoClosedForm,
    #[error("constraint violated at mode {mode}: |tilted coefficient| = {residual:e}")]
    ConstraintViolated { mode: usize, residual: f64 },
    #[error("density is not 1/{period}-periodic: mode {mode} has magnitude {magnitude:e}")]
    PeriodicityViolated { period: usize, mode: usize, magnitude: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
