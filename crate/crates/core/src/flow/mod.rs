//! McKean–Vlasov gradient flow, the log-gas Fourier hierarchy and rate fits.

mod fit;
mod loggas;
mod mv;

pub use fit::{auto_window, fit_rate, fit_samples, RateFit, RateModel, LOCAL_R2, MIN_POINTS};
pub use loggas::{integrate_loggas, loggas_rhs, rk4_step, rk4_step_bound};
pub use mv::{
    integrate, mv_step, stationarity_residual, FlowOptions, FlowRecord, FlowTrace, Observable, RecordPolicy,
    GAP_TIME_UNIT, STATIONARY_TOL,
};
