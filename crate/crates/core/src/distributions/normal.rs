use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function `Φ`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 − Φ(x)`, accurate far into the tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(2.0) - 0.977_249_868_051_820_8).abs() < 1e-15);
        assert!((sf(8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
        assert!((pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-16);
    }
}
