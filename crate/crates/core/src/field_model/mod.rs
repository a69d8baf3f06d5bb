//! Field synthesis and second-order structure: signal rendering, stationary
//! Gaussian noise, kernel smoothing, and moment evaluation.

pub mod convolve;
pub mod fit;
pub mod grid;
pub mod moments;
pub mod noise;
pub mod signal;

pub use convolve::{ConvolutionMethod, DiscreteKernel, Kernel2d, KernelSpec, DEFAULT_KERNEL_TRUNCATION};
pub use fit::{average_peak_template, fit_kernel_bandwidth};
pub use grid::{GridField, GridGeometry};
pub use moments::{closed_form_moments, estimate_moments, FieldMoments};
pub use noise::{generate_noise, NoiseSpec};
pub use signal::{render_signal, PeakSpec};

use crate::error::Result;

/// Smooths `field` with the truncated, renormalized Gaussian kernel under
/// periodic boundary conditions.
pub fn smooth(field: &GridField, kernel: &KernelSpec) -> Result<GridField> {
    smooth_with(field, kernel, ConvolutionMethod::default())
}

pub fn smooth_with(field: &GridField, kernel: &KernelSpec, method: ConvolutionMethod) -> Result<GridField> {
    let taps = kernel.discretize(field.spacing())?;
    convolve::convolve(field, &taps, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothing_zero_is_zero() {
        let f = GridField::zeros(GridGeometry::square(32).unwrap());
        let s = smooth(&f, &KernelSpec::new(3.0)).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smoothing_distributes_over_signal_plus_noise() {
        let g = GridGeometry::square(64).unwrap();
        let mu = render_signal(&[PeakSpec::new(20.0, 3.0, 3.0, (30.0, 30.0))], &g).unwrap();
        let z = generate_noise(&NoiseSpec::new(1.0, 0.5, 4), &g).unwrap();
        let k = KernelSpec::new(2.0);
        let lhs = smooth(&mu.add(&z).unwrap(), &k).unwrap();
        let rhs = smooth(&mu, &k).unwrap().add(&smooth(&z, &k).unwrap()).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothed_white_noise_variance_matches_closed_form() {
        let g = GridGeometry::square(512).unwrap();
        let z = generate_noise(&NoiseSpec::new(1.0, 0.0, 11), &g).unwrap();
        let s = smooth(&z, &KernelSpec::new(3.0)).unwrap();
        let expected = 1.0 / (4.0 * std::f64::consts::PI * 9.0);
        assert!((expected - 0.008842).abs() < 1e-6);
        let rel = (s.variance() / expected - 1.0).abs();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn stationary_on_the_torus() {
        let g = GridGeometry::square(256).unwrap();
        let z = generate_noise(&NoiseSpec::new(1.0, 0.0, 5), &g).unwrap();
        let s = smooth(&z, &KernelSpec::new(3.0)).unwrap();
        let (top, bottom) = s.values().split_at(s.values().len() / 2);
        let vt = grid::sample_variance(top.iter().copied());
        let vb = grid::sample_variance(bottom.iter().copied());
        // correlated samples: ~N/(8πξ²) effective points per half, so allow 15%
        assert!((vt / vb - 1.0).abs() < 0.15, "{vt} vs {vb}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn smoothing_is_linear(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            f in prop::collection::vec(-10.0f64..10.0, 20 * 20),
            g in prop::collection::vec(-10.0f64..10.0, 20 * 20),
            gamma in 0.5f64..2.5,
        ) {
            let geom = GridGeometry::square(20).unwrap();
            let f = GridField::from_values(geom, f).unwrap();
            let g = GridField::from_values(geom, g).unwrap();
            let k = KernelSpec::new(gamma);
            let combo = f.zip_with(&g, |x, y| a * x + b * y).unwrap();
            let lhs = smooth(&combo, &k).unwrap();
            let sf = smooth(&f, &k).unwrap();
            let sg = smooth(&g, &k).unwrap();
            for i in 0..lhs.values().len() {
                let rhs = a * sf.values()[i] + b * sg.values()[i];
                let scale = lhs.values()[i].abs().max(1.0);
                prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-10 * scale);
            }
        }
    }
}
