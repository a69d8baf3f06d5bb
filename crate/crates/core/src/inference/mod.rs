//! Testing of candidate peaks: p-values, the Benjamini–Hochberg step-up rule
//! with a random number of tests, and the asymptotic theory used to predict
//! thresholds, error rates, power, and optimal tuning.

pub mod bh;
pub mod pvalues;
pub mod theory;

pub use bh::{bh_procedure, stem_test, BhOutcome};
pub use pvalues::{compute_pvalues, PValueLaw, PValueMode, PVALUE_FLOOR};
pub use theory::{
    default_v_grid, optimal_gamma, optimal_v, power_approx, snr, theoretical_fdr, FdrVariant, TheoryParams,
};
