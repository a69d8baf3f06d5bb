//! Asymptotic quantities: deterministic BH thresholds, leading-order FDR
//! bounds, approximate power, matched-filter SNR and optimal tuning.

use std::f64::consts::PI;

use crate::distributions::{beta_factor, hermite, normal, IsotropicHeightLaw};
use crate::error::{domain, Result};

/// Inputs shared by the asymptotic formulas: level `α`, peak density `A₁`,
/// smoothed-signal area fraction `A₂,γ`, and the null law of the smoothed noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub alpha: f64,
    pub a1: f64,
    pub a2_gamma: f64,
    pub law: IsotropicHeightLaw,
    pub lambda_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdrVariant {
    /// Fixed significance threshold `u`.
    FixedU(f64),
    /// BH with exact p-values above pre-threshold `v`.
    BhExact(f64),
    /// BH with overshoot p-values above pre-threshold `v`.
    BhOvershoot(f64),
}

impl TheoryParams {
    pub fn new(alpha: f64, a1: f64, a2_gamma: f64, law: IsotropicHeightLaw, lambda_det: f64) -> Result<Self> {
        let p = Self {
            alpha,
            a1,
            a2_gamma,
            law,
            lambda_det,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.a1 > 0.0 && self.a1.is_finite()) {
            return domain(format!("A1 must be positive, got {}", self.a1));
        }
        if !(0.0..1.0).contains(&self.a2_gamma) {
            return domain(format!("A2 must lie in [0, 1), got {}", self.a2_gamma));
        }
        if !(self.lambda_det > 0.0 && self.lambda_det.is_finite()) {
            return domain(format!("det(Lambda) must be positive, got {}", self.lambda_det));
        }
        Ok(())
    }

    pub fn sigma_gamma(&self) -> f64 {
        self.law.sigma_gamma()
    }

    pub fn beta(&self, v: f64) -> Result<f64> {
        beta_factor(v, &self.law, self.lambda_det)
    }

    /// Deterministic limit `u*_BH(v)` of the BH threshold with exact p-values.
    pub fn u_star(&self, v: f64) -> Result<f64> {
        self.threshold_with_beta(v, 1.0)
    }

    /// Deterministic limit `u**_BH(v)` of the BH threshold with overshoot
    /// p-values, leading order.
    pub fn u_double_star(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return domain(format!("u** needs a positive pre-threshold, got {v}"));
        }
        self.threshold_with_beta(v, self.beta(v)?)
    }

    pub(crate) fn threshold_with_beta(&self, v: f64, beta: f64) -> Result<f64> {
        let fv = self.law.tail(v);
        let em_v = self.law.em0() * fv;
        let (a, a1) = (self.alpha, self.a1);
        let arg = a * a1 * beta * fv / (a1 + em_v * (1.0 - self.a2_gamma) * (1.0 - a * beta));
        if !(arg > 0.0 && arg < 1.0) {
            return domain(format!("threshold argument {arg} outside (0, 1) at v={v}"));
        }
        self.law.inverse_tail(arg)
    }

    /// Objective maximized by the optimal pre-threshold; proportional to the
    /// tail probability inverted by [`u_double_star`](Self::u_double_star).
    pub fn v_opt_objective(&self, v: f64) -> Result<f64> {
        let s = self.sigma_gamma();
        let x = v / s;
        let beta = self.beta(v)?;
        let em_v = self.law.expected_maxima(v);
        let denom = self.a1 + em_v * (1.0 - self.a2_gamma) * (1.0 - self.alpha * beta);
        Ok(hermite(1, x) * (-x * x / 2.0).exp() / denom)
    }
}

/// Leading-order FDR bound for the given procedure.
pub fn theoretical_fdr(params: &TheoryParams, variant: FdrVariant) -> Result<f64> {
    let frac = |level: f64| {
        let em = params.law.expected_maxima(level) * (1.0 - params.a2_gamma);
        if em == 0.0 {
            0.0
        } else {
            em / (em + params.a1)
        }
    };
    Ok(match variant {
        FdrVariant::FixedU(u) => frac(u),
        FdrVariant::BhExact(v) => params.alpha * frac(v),
        FdrVariant::BhOvershoot(v) => params.alpha * frac(v) * params.beta(v)?,
    })
}

/// Leading-order detection probability `Φ((a·M − u)/σ_γ)` of a peak with
/// amplitude `a` and smoothed unit-peak height `M`.
pub fn power_approx(u: f64, amplitude: f64, peak_height: f64, sigma_gamma: f64) -> Result<f64> {
    if !(sigma_gamma > 0.0) {
        return domain(format!("sigma_gamma must be positive, got {sigma_gamma}"));
    }
    Ok(normal::cdf((amplitude * peak_height - u) / sigma_gamma))
}

/// Signal-to-noise ratio `a·h_γ(τ)/σ_γ` of a Gaussian peak of scale `b` after
/// Gaussian smoothing, planar case.
pub fn snr(gamma: f64, amplitude: f64, b: f64, nu: f64, sigma: f64) -> Result<f64> {
    if gamma < 0.0 || nu < 0.0 || (gamma == 0.0 && nu == 0.0) {
        return domain(format!("need gamma, nu >= 0, not both zero; got {gamma}, {nu}"));
    }
    if !(b > 0.0 && sigma > 0.0) {
        return domain(format!("peak scale and sigma must be positive, got {b}, {sigma}"));
    }
    let g2 = gamma * gamma;
    Ok(amplitude / (sigma * PI.sqrt()) * (g2 + nu * nu).sqrt() / (g2 + b * b))
}

/// Bandwidth maximizing [`snr`]: `√(b² − 2ν²)` when `ν < b/√2`, else 0.
pub fn optimal_gamma(b: f64, nu: f64) -> f64 {
    let d = b * b - 2.0 * nu * nu;
    if d > 0.0 {
        d.sqrt()
    } else {
        0.0
    }
}

/// Pre-threshold grid `v/σ_γ ∈ [0.1, 4]` in steps of 0.01, in height units.
pub fn default_v_grid(sigma_gamma: f64) -> Vec<f64> {
    (10..=400).map(|i| i as f64 * 0.01 * sigma_gamma).collect()
}

/// Grid point maximizing [`TheoryParams::v_opt_objective`]; ties go to the
/// smaller `v`.
pub fn optimal_v(params: &TheoryParams, v_grid: &[f64]) -> Result<f64> {
    if v_grid.is_empty() {
        return domain("optimal_v needs a non-empty grid");
    }
    if v_grid.windows(2).any(|w| !(w[1] > w[0])) || !(v_grid[0] > 0.0) {
        return domain("v grid must be strictly increasing and positive");
    }
    let mut best = (v_grid[0], params.v_opt_objective(v_grid[0])?);
    for &v in &v_grid[1..] {
        let obj = params.v_opt_objective(v)?;
        if obj > best.1 {
            best = (v, obj);
        }
    }
    Ok(best.0)
}
