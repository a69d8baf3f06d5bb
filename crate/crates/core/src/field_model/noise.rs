use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::convolve::{convolve_separable, DiscreteKernel};
use super::grid::{GridField, GridGeometry};
use crate::error::{domain, Result};

/// Support half-width, in units of ν, of the kernel that colours white noise.
pub const NOISE_KERNEL_TRUNCATION: f64 = 6.0;

/// Gaussian autocorrelation noise `z = σ ∫ ν⁻² φ₂((t − s)/ν) dB(s)`;
/// white noise when `nu == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, nu: f64, seed: u64) -> Self {
        Self { sigma, nu, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return domain(format!("noise sigma must be positive, got {}", self.sigma));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return domain(format!("noise nu must be non-negative, got {}", self.nu));
        }
        Ok(())
    }
}

/// Draws a stationary noise field on the torus. Deterministic in `spec.seed`.
///
/// White-noise cells have variance `σ²/spacing²` so that lattice sums
/// approximate the continuous stochastic integral.
pub fn generate_noise(spec: &NoiseSpec, grid: &GridGeometry) -> Result<GridField> {
    spec.validate()?;
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd = spec.sigma / grid.spacing;
    let values: Vec<f64> = (0..grid.len())
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let white = GridField::from_values(*grid, values)?;
    if spec.nu == 0.0 {
        return Ok(white);
    }
    let limit = (grid.height.min(grid.width) - 1) as f64 / 2.0 * grid.spacing;
    let radius = (spec.nu * NOISE_KERNEL_TRUNCATION).min(limit);
    let kernel = DiscreteKernel::gaussian(spec.nu, radius, grid.spacing);
    convolve_separable(&white, &kernel)
}
