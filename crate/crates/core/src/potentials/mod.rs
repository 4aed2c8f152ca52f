//! Interaction kernels with exact Fourier laws and their thresholds.

mod bessel;
mod catalog;
mod thresholds;

pub use bessel::{bessel_i, bessel_i_sequence, bessel_i_series, MAX_ARGUMENT};
pub use catalog::{make_potential, wrap, ModelParams, Potential, PotentialSpec};
pub use thresholds::{beta_star, check_decay, k_sharp, normalize, r_star, DecayReport, SharpThreshold};

use crate::error::Result;
use std::io::Write;

/// Writes `k,coefficient` rows for k = 1..=truncation.
pub fn write_coefficients_csv<W: Write>(w: &Potential, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k", "coefficient"])?;
    for k in 1..=w.truncation() {
        wtr.write_record([k.to_string(), format!("{:e}", w.coeff(k))])?;
    }
    wtr.flush()?;
    Ok(())
}
