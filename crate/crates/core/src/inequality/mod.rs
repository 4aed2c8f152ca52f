//! Sharp entropy inequalities on the circle and the free-energy coercivity split.

mod gaps;
mod suite;

pub use gaps::{
    check_periodic, coercivity_gap, coercivity_split, entropy_seminorm_gap, lebedev_milin_gap, sharpness_exponent,
    tilted_moment_residual, CoercivityTerms, CONSTRAINT_TOL, NORMALIZATION_TOL,
};
pub use suite::{
    coercivity_suite, gap_suite, sample_rng, GapKind, GapSample, GapSuiteReport, GapSummary, SuiteOptions, TiltSampler,
    VIOLATION_TOL,
};
