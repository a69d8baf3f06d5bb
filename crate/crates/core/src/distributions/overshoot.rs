//! Hermite-ratio approximation to the overshoot distribution of local maxima
//! above a pre-threshold, and the factor relating it to the exact law.

use std::f64::consts::PI;

use super::hermite::hermite;
use super::isotropic::{invert_decreasing, IsotropicHeightLaw};
use crate::error::{domain, Result};

/// `K(u, v) = H_{N−1}(u/σ)e^{−u²/2σ²} / H_{N−1}(v/σ)e^{−v²/2σ²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootLaw {
    sigma_gamma: f64,
    dim: usize,
    pre_threshold: f64,
}

impl OvershootLaw {
    /// The Hermite factor must be positive at and above `v`: for `N ≥ 2`
    /// this requires `v > 0` (and `v/σ` above the largest root of `H_{N−1}`).
    pub fn new(sigma_gamma: f64, dim: usize, pre_threshold: f64) -> Result<Self> {
        if !(sigma_gamma.is_finite() && sigma_gamma > 0.0) {
            return domain(format!("sigma_gamma must be positive, got {sigma_gamma}"));
        }
        if !(1..=11).contains(&dim) {
            return domain(format!("dimension must lie in 1..=11, got {dim}"));
        }
        if !pre_threshold.is_finite() {
            return domain("overshoot law needs a finite pre-threshold");
        }
        let x = pre_threshold / sigma_gamma;
        if dim >= 2 && (x <= 0.0 || (0..dim).any(|k| hermite(k, x) <= 0.0)) {
            return domain(format!(
                "pre-threshold {pre_threshold} must exceed the largest root of H_{} (times sigma_gamma)",
                dim - 1
            ));
        }
        Ok(Self {
            sigma_gamma,
            dim,
            pre_threshold,
        })
    }

    pub fn sigma_gamma(&self) -> f64 {
        self.sigma_gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pre_threshold(&self) -> f64 {
        self.pre_threshold
    }

    /// `K(u, v)` clamped to `[0, 1]`; requires `u ≥ v`.
    pub fn k(&self, u: f64) -> Result<f64> {
        let v = self.pre_threshold;
        if u < v {
            return domain(format!("overshoot needs u >= v, got u={u}, v={v}"));
        }
        Ok(self.k_unchecked(u))
    }

    fn k_unchecked(&self, u: f64) -> f64 {
        if u == f64::INFINITY {
            return 0.0;
        }
        let (xu, xv) = (u / self.sigma_gamma, self.pre_threshold / self.sigma_gamma);
        let n = self.dim - 1;
        let ratio = hermite(n, xu) / hermite(n, xv) * (-(xu * xu - xv * xv) / 2.0).exp();
        ratio.clamp(0.0, 1.0)
    }

    /// Smallest `u ≥ v` with `K(u, v) ≤ p`.
    pub fn inverse(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return domain(format!("probability must lie in (0, 1], got {p}"));
        }
        let xv = self.pre_threshold / self.sigma_gamma;
        let x = invert_decreasing(|x| self.k_unchecked(x * self.sigma_gamma), p, xv, xv + 40.0);
        Ok(x * self.sigma_gamma)
    }
}

/// `overshoot_K(u, v)` for an `N`-dimensional field.
pub fn overshoot_k(u: f64, v: f64, sigma_gamma: f64, dim: usize) -> Result<f64> {
    OvershootLaw::new(sigma_gamma, dim, v)?.k(u)
}

/// `β(v)`: expected Euler characteristic density of the excursion set above
/// `v` divided by the expected density of maxima above `v`, for `N = 2`.
pub fn beta_factor(v: f64, law: &IsotropicHeightLaw, lambda_det: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("beta needs a positive finite pre-threshold, got {v}"));
    }
    if !(lambda_det > 0.0 && lambda_det.is_finite()) {
        return domain(format!("det(Lambda) must be positive, got {lambda_det}"));
    }
    let s = law.sigma_gamma();
    let x = v / s;
    let denom = law.expected_maxima(v);
    if !(denom > 0.0) {
        return domain(format!("expected maxima above v={v} underflows"));
    }
    let euler = (2.0 * PI).powf(-1.5) / (s * s) * lambda_det.sqrt() * hermite(1, x) * (-x * x / 2.0).exp();
    Ok(euler / denom)
}
