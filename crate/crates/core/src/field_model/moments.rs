//! Variance and derivative moments of a smoothed isotropic noise field.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::{sample_variance, GridField};
use crate::error::{domain, Result};

/// Minimum number of grid points for moment estimation.
pub const MIN_ESTIMATION_POINTS: usize = 1000;

/// Second-order structure of a stationary isotropic field: its standard
/// deviation and the first two derivatives at zero of its correlation
/// function `ρ(‖t‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMoments {
    pub sigma_gamma: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// `−ρ'/√ρ''`
    pub kappa: f64,
    /// Determinant of the gradient covariance.
    pub lambda_det: f64,
}

impl FieldMoments {
    /// Builds moments from `σ_γ`, `ρ'`, `ρ''` with the isotropic gradient
    /// covariance `−2ρ'σ_γ² I`.
    pub fn from_correlation(sigma_gamma: f64, rho1: f64, rho2: f64) -> Result<Self> {
        let m = Self {
            sigma_gamma,
            rho1,
            rho2,
            kappa: -rho1 / rho2.sqrt(),
            lambda_det: (-2.0 * rho1 * sigma_gamma * sigma_gamma).powi(2),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_gamma.is_finite() && self.sigma_gamma > 0.0) {
            return domain(format!("sigma_gamma must be positive, got {}", self.sigma_gamma));
        }
        if !(self.rho1.is_finite() && self.rho1 < 0.0) {
            return domain(format!("rho' must be negative, got {}", self.rho1));
        }
        if !(self.rho2.is_finite() && self.rho2 > 0.0) {
            return domain(format!("rho'' must be positive, got {}", self.rho2));
        }
        if !(self.lambda_det.is_finite() && self.lambda_det > 0.0) {
            return domain(format!("det(Lambda) must be positive, got {}", self.lambda_det));
        }
        Ok(())
    }

    /// Expected number of local maxima per unit area, `−√3ρ''/(3πρ')`.
    pub fn maxima_density(&self) -> f64 {
        -(3.0f64).sqrt() * self.rho2 / (3.0 * PI * self.rho1)
    }
}

/// Closed-form moments for Gaussian-autocorrelated noise of scale `nu`
/// smoothed by a Gaussian kernel of bandwidth `gamma`, with `ξ = √(γ² + ν²)`.
pub fn closed_form_moments(gamma: f64, nu: f64, sigma: f64) -> Result<FieldMoments> {
    if !(gamma >= 0.0 && nu >= 0.0 && gamma.is_finite() && nu.is_finite()) {
        return domain(format!("gamma and nu must be non-negative, got {gamma}, {nu}"));
    }
    if gamma == 0.0 && nu == 0.0 {
        return domain("gamma = nu = 0 gives a field with no smoothness");
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let xi2 = gamma * gamma + nu * nu;
    let sigma_gamma = sigma / (4.0 * PI * xi2).sqrt();
    let rho1 = -1.0 / (4.0 * xi2);
    let rho2 = 1.0 / (16.0 * xi2 * xi2);
    let mut m = FieldMoments::from_correlation(sigma_gamma, rho1, rho2)?;
    m.kappa = 1.0;
    Ok(m)
}

/// Estimates moments from a field assumed stationary over `mask` (all points
/// when `None`). Derivatives are periodic central differences of one grid
/// step; both axes are averaged.
pub fn estimate_moments(field: &GridField, mask: Option<&[bool]>) -> Result<FieldMoments> {
    let n = field.values().len();
    if let Some(m) = mask {
        if m.len() != n {
            return domain(format!("mask has {} entries, field has {n}", m.len()));
        }
    }
    let selected: Vec<(usize, usize)> = (0..field.height())
        .flat_map(|r| (0..field.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.is_none_or(|m| m[r * field.width() + c]))
        .collect();
    if selected.len() < MIN_ESTIMATION_POINTS {
        return domain(format!(
            "moment estimation needs at least {MIN_ESTIMATION_POINTS} points, mask covers {}",
            selected.len()
        ));
    }

    let s = field.spacing();
    let at = |r: usize, c: usize, dr: isize, dc: isize| field.get_wrapped(r as isize + dr, c as isize + dc);

    let var0 = sample_variance(selected.iter().map(|&(r, c)| field.get(r, c)));
    if !(var0 > 0.0) {
        return domain("field has zero variance over the estimation region");
    }

    let d1x = || selected.iter().map(|&(r, c)| (at(r, c, 0, 1) - at(r, c, 0, -1)) / (2.0 * s));
    let d1y = || selected.iter().map(|&(r, c)| (at(r, c, 1, 0) - at(r, c, -1, 0)) / (2.0 * s));
    let d2x = selected
        .iter()
        .map(|&(r, c)| (at(r, c, 0, 1) - 2.0 * field.get(r, c) + at(r, c, 0, -1)) / (s * s));
    let d2y = selected
        .iter()
        .map(|&(r, c)| (at(r, c, 1, 0) - 2.0 * field.get(r, c) + at(r, c, -1, 0)) / (s * s));

    let vx = sample_variance(d1x());
    let vy = sample_variance(d1y());
    let cxy = sample_covariance(d1x(), d1y());
    let v2 = 0.5 * (sample_variance(d2x) + sample_variance(d2y));

    let rho1 = -0.5 * (vx + vy) / (2.0 * var0);
    let rho2 = v2 / (12.0 * var0);
    Ok(FieldMoments {
        sigma_gamma: var0.sqrt(),
        rho1,
        rho2,
        kappa: -rho1 / rho2.sqrt(),
        lambda_det: vx * vy - cxy * cxy,
    })
}

fn sample_covariance(a: impl Iterator<Item = f64> + Clone, b: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = a.clone().count();
    if n < 2 {
        return 0.0;
    }
    let ma = a.clone().sum::<f64>() / n as f64;
    let mb = b.clone().sum::<f64>() / n as f64;
    a.zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::{generate_noise, smooth, GridGeometry, KernelSpec, NoiseSpec};

    #[test]
    fn closed_form_at_gamma_three() {
        let m = closed_form_moments(3.0, 0.0, 1.0).unwrap();
        assert!((m.sigma_gamma - 0.094032).abs() < 1e-6);
        assert!((m.rho1 + 1.0 / 36.0).abs() < 1e-15);
        assert!((m.rho2 - 1.0 / 1296.0).abs() < 1e-15);
        assert_eq!(m.kappa, 1.0);
        let expected_det = (2.0 / 36.0 * m.sigma_gamma.powi(2)).powi(2);
        assert!((m.lambda_det - expected_det).abs() < 1e-18);
    }

    #[test]
    fn closed_form_unsmoothed_limit() {
        let m = closed_form_moments(0.0, 2.0, 1.0).unwrap();
        assert!((m.rho1 + 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(m.kappa, 1.0);
    }

    #[test]
    fn closed_form_kappa_is_one_and_boundary_condition_holds() {
        for &(g, n) in &[(0.5, 0.0), (1.0, 2.0), (4.0, 1.0), (2.6, 0.3)] {
            let m = closed_form_moments(g, n, 2.0).unwrap();
            assert_eq!(m.kappa, 1.0);
            assert!((-m.rho1 / m.rho2.sqrt() - 1.0).abs() < 1e-12);
            assert!(m.rho2 - m.rho1 * m.rho1 >= -1e-15);
        }
    }

    #[test]
    fn closed_form_needs_smoothness() {
        assert!(closed_form_moments(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn maxima_density_formula() {
        let m = closed_form_moments(3.0, 0.0, 1.0).unwrap();
        let oracle = 1.0 / (4.0 * 3f64.sqrt() * PI * 9.0);
        assert!((m.maxima_density() - oracle).abs() < 1e-15);
        assert!((oracle - 0.005105).abs() < 1e-6);
    }

    #[test]
    fn estimates_agree_with_closed_form() {
        let g = GridGeometry::square(512).unwrap();
        let z = generate_noise(&NoiseSpec::new(1.0, 0.0, 21), &g).unwrap();
        let zs = smooth(&z, &KernelSpec::new(3.0)).unwrap();
        let est = estimate_moments(&zs, None).unwrap();
        let exact = closed_form_moments(3.0, 0.0, 1.0).unwrap();
        assert!((est.sigma_gamma / exact.sigma_gamma - 1.0).abs() <= 0.03, "{est:?}");
        assert!((est.kappa - 1.0).abs() <= 0.07, "{est:?}");
    }

    #[test]
    fn kappa_estimate_with_coloured_noise() {
        let g = GridGeometry::square(512).unwrap();
        let z = generate_noise(&NoiseSpec::new(1.0, 1.0, 8), &g).unwrap();
        let zs = smooth(&z, &KernelSpec::new(3.0)).unwrap();
        let est = estimate_moments(&zs, None).unwrap();
        assert!((0.93..=1.07).contains(&est.kappa), "{est:?}");
    }

    #[test]
    fn sinusoid_gives_finite_moments() {
        let g = GridGeometry::square(64).unwrap();
        let f = GridField::from_fn(g, |r, c| (0.3 * c as f64).sin() + (0.2 * r as f64).cos());
        let m = estimate_moments(&f, None).unwrap();
        assert!(m.sigma_gamma.is_finite() && m.rho1.is_finite() && m.rho2.is_finite() && m.kappa.is_finite());
    }

    #[test]
    fn small_mask_is_rejected() {
        let g = GridGeometry::square(64).unwrap();
        let f = GridField::from_fn(g, |r, c| (r * c) as f64);
        let mask: Vec<bool> = (0..g.len()).map(|i| i < 999).collect();
        assert!(estimate_moments(&f, Some(&mask)).is_err());
        let mask: Vec<bool> = (0..g.len()).map(|i| i < 1000).collect();
        assert!(estimate_moments(&f, Some(&mask)).is_ok());
    }
}
