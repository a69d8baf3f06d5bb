//! Exact height distribution of local maxima of an isotropic Gaussian field
//! on the plane.

use std::f64::consts::{PI, SQRT_2};

use super::normal;
use super::quadrature::integrate;
use crate::error::{domain, Result};
use crate::field_model::FieldMoments;

/// Shape parameters within this distance of `√2` are rejected: the density
/// has a vanishing denominator there.
pub const KAPPA_EPSILON: f64 = 1e-9;

/// Default relative tolerance of the tail quadrature.
pub const TAIL_REL_TOL: f64 = 1e-12;
/// Default absolute tolerance of the tail quadrature.
pub const TAIL_ABS_TOL: f64 = 1e-13;

// g decays like a Gaussian: beyond 12 standard units the mass is below e^-72.
const UPPER_SPAN: f64 = 12.0;
const LOWER_LIMIT: f64 = -40.0;

/// Standardized density of the height of a local maximum, for shape
/// parameter `κ ∈ (0, √2)`.
pub fn density_g(x: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(density_unchecked(x, kappa))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa <= SQRT_2 - KAPPA_EPSILON) {
        return domain(format!("kappa must lie in (0, sqrt(2)), got {kappa}"));
    }
    Ok(())
}

#[inline]
fn density_unchecked(x: f64, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    let a = 2.0 - k2;
    let b = 3.0 - k2;
    let t1 = 3f64.sqrt() * k2 * (x * x - 1.0) * normal::pdf(x) * normal::cdf(kappa * x / a.sqrt());
    let t2 = kappa * x * (3.0 * a).sqrt() / (2.0 * PI) * (-x * x / a).exp();
    let t3 = 6f64.sqrt() / (PI * b).sqrt()
        * (-3.0 * x * x / (2.0 * b)).exp()
        * normal::cdf(kappa * x / (a * b).sqrt());
    t1 + t2 + t3
}

/// Null law of local-maximum heights of an isotropic field with standard
/// deviation `σ_γ`, shape `κ`, and `em0` expected maxima per unit area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicHeightLaw {
    sigma_gamma: f64,
    kappa: f64,
    em0: f64,
    rel_tol: f64,
}

impl IsotropicHeightLaw {
    pub fn new(sigma_gamma: f64, kappa: f64, em0: f64) -> Result<Self> {
        if !(sigma_gamma.is_finite() && sigma_gamma > 0.0) {
            return domain(format!("sigma_gamma must be positive, got {sigma_gamma}"));
        }
        check_kappa(kappa)?;
        if !(em0.is_finite() && em0 > 0.0) {
            return domain(format!("expected maxima density must be positive, got {em0}"));
        }
        Ok(Self {
            sigma_gamma,
            kappa,
            em0,
            rel_tol: TAIL_REL_TOL,
        })
    }

    pub fn from_moments(m: &FieldMoments) -> Result<Self> {
        m.validate()?;
        Self::new(m.sigma_gamma, m.kappa, m.maxima_density())
    }

    /// Same law evaluated with a different quadrature tolerance.
    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn sigma_gamma(&self) -> f64 {
        self.sigma_gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Expected number of local maxima per unit area.
    pub fn em0(&self) -> f64 {
        self.em0
    }

    /// Standardized density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        density_unchecked(x, self.kappa)
    }

    /// `F(u) = P(height > u)` for a local maximum of the null field.
    pub fn tail(&self, u: f64) -> f64 {
        if u == f64::NEG_INFINITY {
            return 1.0;
        }
        if u == f64::INFINITY {
            return 0.0;
        }
        self.tail_standardized(u / self.sigma_gamma)
    }

    fn tail_standardized(&self, x: f64) -> f64 {
        let lo = x.max(LOWER_LIMIT);
        let hi = x.max(0.0) + UPPER_SPAN;
        let v = integrate(|t| density_unchecked(t, self.kappa), lo, hi, TAIL_ABS_TOL.min(self.rel_tol), self.rel_tol);
        v.clamp(0.0, 1.0)
    }

    /// `F(u, v) = F(u)/F(v)`, the tail of a maximum's height given it exceeds `v`.
    pub fn tail_cond(&self, u: f64, v: f64) -> Result<f64> {
        if u < v {
            return domain(format!("conditional tail needs u >= v, got u={u}, v={v}"));
        }
        let fv = self.tail(v);
        if !(fv > 1e-300) {
            return domain(format!("F(v) underflows at v={v}"));
        }
        if u == v {
            return Ok(1.0);
        }
        Ok((self.tail(u) / fv).clamp(0.0, 1.0))
    }

    /// Expected number of maxima above `u` per unit area.
    pub fn expected_maxima(&self, u: f64) -> f64 {
        self.em0 * self.tail(u)
    }

    /// Smallest `u` with `F(u) ≤ p`, by bisection on `[−10σ_γ, 15σ_γ]`.
    pub fn inverse_tail(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("tail probability must lie in (0, 1), got {p}"));
        }
        let x = invert_decreasing(|x| self.tail_standardized(x), p, -10.0, 15.0);
        Ok(x * self.sigma_gamma)
    }
}

const TABLE_LO: f64 = -8.0;
const TABLE_HI: f64 = 10.0;
const TABLE_STEP: f64 = 0.01;

/// `F` tabulated on a fine standardized grid and interpolated by cubic
/// Hermite splines in `ln F`, whose derivative `−g/F` is known exactly.
/// Heights outside the table fall back to direct quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedTail {
    law: IsotropicHeightLaw,
    ln_f: Vec<f64>,
    slope: Vec<f64>,
}

impl TabulatedTail {
    pub fn new(law: IsotropicHeightLaw) -> Self {
        let n = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
        let x = |i: usize| TABLE_LO + i as f64 * TABLE_STEP;
        let g = |t: f64| density_unchecked(t, law.kappa);
        let mut f = vec![0.0; n];
        f[n - 1] = integrate(g, TABLE_HI, TABLE_HI + UPPER_SPAN, 1e-60, TAIL_REL_TOL);
        for i in (0..n - 1).rev() {
            f[i] = f[i + 1] + integrate(g, x(i), x(i + 1), 1e-15 * f[i + 1], 1e-14);
        }
        let ln_f = f.iter().map(|v| v.ln()).collect();
        let slope = f.iter().enumerate().map(|(i, v)| -g(x(i)) / v).collect();
        Self { law, ln_f, slope }
    }

    pub fn law(&self) -> &IsotropicHeightLaw {
        &self.law
    }

    /// Interpolated `F(u)`.
    pub fn tail(&self, u: f64) -> f64 {
        let x = u / self.law.sigma_gamma;
        let pos = (x - TABLE_LO) / TABLE_STEP;
        if !(pos >= 0.0 && pos < (self.ln_f.len() - 1) as f64) {
            return self.law.tail(u);
        }
        let i = pos as usize;
        let t = pos - i as f64;
        let (y0, y1) = (self.ln_f[i], self.ln_f[i + 1]);
        let (d0, d1) = (self.slope[i] * TABLE_STEP, self.slope[i + 1] * TABLE_STEP);
        let t2 = t * t;
        let t3 = t2 * t;
        let ln = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        ln.exp().min(1.0)
    }

    /// Smallest `u` with interpolated `F(u) ≤ p`, bisecting as
    /// [`IsotropicHeightLaw::inverse_tail`] does.
    pub fn inverse_tail(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("tail probability must lie in (0, 1), got {p}"));
        }
        let s = self.law.sigma_gamma;
        Ok(invert_decreasing(|x| self.tail(x * s), p, -10.0, 15.0) * s)
    }
}

/// Bisection for `f(x) = target` with `f` non-increasing; results are clamped
/// to the bracket.
pub(crate) fn invert_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) <= target {
        return lo;
    }
    if f(hi) >= target {
        return hi;
    }
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::closed_form_moments;

    #[test]
    fn tabulated_tail_matches_quadrature() {
        for kappa in [0.5, 1.0, 1.3] {
            let law = IsotropicHeightLaw::new(0.7, kappa, 0.01).unwrap();
            let table = TabulatedTail::new(law);
            for i in 0..=1400 {
                let x = -7.5 + i as f64 * 0.01 + 0.003;
                let exact = law.tail(x * 0.7);
                let approx = table.tail(x * 0.7);
                assert!(((approx - exact) / exact).abs() < 1e-9, "kappa={kappa} x={x}: {approx} vs {exact}");
            }
            assert_eq!(table.tail(12.0 * 0.7), law.tail(12.0 * 0.7));
            for p in [0.9, 0.05, 1e-4, 1e-8] {
                let (a, b) = (table.inverse_tail(p).unwrap(), law.inverse_tail(p).unwrap());
                assert!((a - b).abs() < 1e-8, "{p}: {a} vs {b}");
            }
        }
    }

    // Independent oracle: composite Simpson on a fine uniform grid.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn density_at_zero() {
        // three-term formula at x = 0, κ = 1: √6/√(2π)·½ − √3·φ(0)·½
        let oracle = 6f64.sqrt() / (2.0 * PI).sqrt() * 0.5 - 3f64.sqrt() / (2.0 * PI).sqrt() * 0.5;
        let g = density_g(0.0, 1.0).unwrap();
        assert!((g - oracle).abs() < 1e-15);
        assert!((g - 0.143108).abs() < 1e-6);
    }

    #[test]
    fn density_integrates_to_one() {
        for &k in &[0.25, 0.5, 0.75, 1.0, 1.25, 1.41] {
            let mass = simpson(|x| density_g(x, k).unwrap(), -10.0, 10.0, 20_000);
            assert!((mass - 1.0).abs() < 1e-8, "kappa {k}: {mass}");
        }
    }

    #[test]
    fn density_is_non_negative() {
        for i in 0..=1200 {
            let x = -6.0 + i as f64 * 0.01;
            assert!(density_g(x, 1.0).unwrap() >= 0.0, "{x}");
        }
    }

    #[test]
    fn kappa_range() {
        assert!(density_g(0.0, 0.0).is_err());
        assert!(density_g(0.0, SQRT_2).is_err());
        assert!(density_g(0.0, 1.414).is_ok());
    }

    #[test]
    fn tail_matches_simpson_oracle() {
        let law = IsotropicHeightLaw::new(1.0, 1.0, 1.0).unwrap();
        for &u in &[-3.0, -1.0, 0.0, 0.7, 2.0, 3.5] {
            let oracle = simpson(|x| law.density(x), u, 14.0, 40_000);
            assert!((law.tail(u) - oracle).abs() < 1e-10, "{u}");
        }
    }

    #[test]
    fn tail_limits_and_monotonicity() {
        let law = IsotropicHeightLaw::new(0.3, 0.8, 0.01).unwrap();
        assert_eq!(law.tail(f64::NEG_INFINITY), 1.0);
        assert_eq!(law.tail(f64::INFINITY), 0.0);
        assert!(law.tail(0.0) >= law.tail(1.0) && law.tail(1.0) >= law.tail(2.0));
        assert!((law.tail(-20.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn maxima_heights_dominate_the_marginal() {
        let law = IsotropicHeightLaw::new(1.0, 1.0, 1.0).unwrap();
        for &u in &[1.0, 1.5, 2.0, 3.0, 4.0] {
            assert!(law.tail(u) > normal::sf(u));
        }
    }

    #[test]
    fn conditional_tail() {
        let law = IsotropicHeightLaw::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(law.tail_cond(1.2, 1.2).unwrap(), 1.0);
        assert!((law.tail_cond(2.0, f64::NEG_INFINITY).unwrap() - law.tail(2.0)).abs() < 1e-15);
        let (u, v) = (2.7, 1.1);
        let prod = law.tail_cond(u, v).unwrap() * law.tail(v);
        assert!((prod - law.tail(u)).abs() < 1e-12);
        assert!(law.tail_cond(1.0, 2.0).is_err());
        assert!(law.tail_cond(50.0, 40.0).is_err());
    }

    #[test]
    fn expected_maxima_per_unit_area() {
        let m = closed_form_moments(3.0, 0.0, 1.0).unwrap();
        let law = IsotropicHeightLaw::from_moments(&m).unwrap();
        let oracle = 1.0 / (4.0 * 3f64.sqrt() * PI * 9.0);
        assert!((law.expected_maxima(f64::NEG_INFINITY) - oracle).abs() < 1e-15);
        assert_eq!(law.expected_maxima(f64::INFINITY), 0.0);
    }

    #[test]
    fn inverse_round_trip() {
        let law = IsotropicHeightLaw::new(0.094, 1.0, 0.005).unwrap();
        for &p in &[0.9, 0.5, 0.05, 3.1e-3, 1e-6, 1e-12] {
            let u = law.inverse_tail(p).unwrap();
            assert!((law.tail(u) - p).abs() <= 1e-9 * p.max(1e-3), "{p}");
        }
        assert!(law.inverse_tail(0.0).is_err());
        assert!(law.inverse_tail(1.0).is_err());
    }
}
