//! Peak detection in stationary Gaussian random fields on planar grids by
//! smoothing and testing of local maxima (STEM).
//!
//! The pipeline is:
//!
//! 1. smooth the observed field with a Gaussian kernel ([`field_model::smooth`]);
//! 2. collect local maxima above a pre-threshold `v` ([`maxima::find_local_maxima`]);
//! 3. assign each maximum a p-value from the null height distribution of local
//!    maxima, exact for isotropic noise or the overshoot approximation
//!    ([`inference::compute_pvalues`]);
//! 4. apply Benjamini–Hochberg over the random number of candidates
//!    ([`inference::stem_test`]).
//!
//! [`experiment`] wraps the pipeline in a reproducible Monte Carlo harness
//! and [`io`] holds the on-disk formats.

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod field_model;
pub mod inference;
pub mod io;
pub mod maxima;
pub mod scenario;

pub use error::{Result, StemError};
pub use field_model::{
    closed_form_moments, estimate_moments, fit_kernel_bandwidth, generate_noise, render_signal, smooth, FieldMoments,
    GridField, GridGeometry, KernelSpec, NoiseSpec, PeakSpec,
};
pub use inference::{bh_procedure, BhOutcome, PValueLaw, PValueMode, TheoryParams};
pub use maxima::{build_region_masks, classify_peaks, find_local_maxima, CandidatePeak, Region, RegionMasks};
pub use scenario::ScenarioSpec;
