//! Least-squares fit of a Gaussian kernel bandwidth to an empirical peak shape.

use super::grid::{GridField, GridGeometry};
use crate::error::{domain, Result};
use crate::maxima::find_local_maxima;

const LOWER_BANDWIDTH: f64 = 0.1;
const GOLDEN_TOLERANCE: f64 = 1e-7;

/// Fits `γ` so that `exp(−‖t − t₀‖² / 2γ²)` best matches the template scaled
/// to unit peak, where `t₀` is the template's maximum. Golden-section search
/// over `(0.1, width/2]`.
pub fn fit_kernel_bandwidth(template: &GridField) -> Result<f64> {
    let (r0, c0, peak) = template.argmax();
    let floor = template.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(peak > 0.0) || peak - floor <= f64::EPSILON * peak.abs().max(1.0) {
        return domain("template is flat or has no positive maximum");
    }
    let s = template.spacing();
    let scaled: Vec<f64> = template.values().iter().map(|v| v / peak).collect();
    let w = template.width();
    let sse = |gamma: f64| -> f64 {
        let inv = 1.0 / (2.0 * gamma * gamma);
        scaled
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let dr = (i / w) as f64 - r0 as f64;
                let dc = (i % w) as f64 - c0 as f64;
                let m = (-(dr * dr + dc * dc) * s * s * inv).exp();
                (t - m) * (t - m)
            })
            .sum()
    };
    let upper = 0.5 * template.width() as f64 * s;
    if upper <= LOWER_BANDWIDTH {
        return domain("template too narrow to fit a bandwidth");
    }
    Ok(golden_section_min(sse, LOWER_BANDWIDTH, upper, GOLDEN_TOLERANCE))
}

pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Averages `(2·radius+1)²` windows centred on the `count` highest local
/// maxima of `field`, aligned at their highest point, after subtracting the
/// field median. Windows wrap periodically.
pub fn average_peak_template(field: &GridField, count: usize, radius: usize) -> Result<GridField> {
    if count == 0 {
        return domain("template needs at least one peak");
    }
    let side = 2 * radius + 1;
    if side > field.height() || side > field.width() {
        return domain(format!("template window {side} exceeds field"));
    }
    let maxima = find_local_maxima(field, f64::NEG_INFINITY);
    if maxima.is_empty() {
        return domain("field has no local maxima");
    }
    let mut sorted = field.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];

    let used = &maxima[..count.min(maxima.len())];
    let geom = GridGeometry::new(side, side, field.spacing())?;
    let mut acc = GridField::zeros(geom);
    for peak in used {
        let (pr, pc) = peak.location;
        for i in 0..side {
            for j in 0..side {
                let v = field.get_wrapped(
                    pr as isize + i as isize - radius as isize,
                    pc as isize + j as isize - radius as isize,
                );
                acc.set(i, j, acc.get(i, j) + (v - median) / used.len() as f64);
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(side: usize, gamma: f64) -> GridField {
        let g = GridGeometry::square(side).unwrap();
        let c = (side / 2) as f64;
        GridField::from_fn(g, |r, col| {
            let d2 = (r as f64 - c).powi(2) + (col as f64 - c).powi(2);
            (-d2 / (2.0 * gamma * gamma)).exp()
        })
    }

    #[test]
    fn self_fit_recovers_bandwidth() {
        let gamma = fit_kernel_bandwidth(&bump(15, 1.6)).unwrap();
        assert!((gamma - 1.6).abs() < 0.01, "{gamma}");
    }

    #[test]
    fn noisy_fit_stays_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let clean = bump(25, 3.0);
            let values = clean.values().iter().map(|v| v + 0.01 * rng.random_range(-1.0..1.0)).collect();
            let noisy = GridField::from_values(*clean.geometry(), values).unwrap();
            let gamma = fit_kernel_bandwidth(&noisy).unwrap();
            assert!((2.8..=3.2).contains(&gamma), "{gamma}");
        }
    }

    #[test]
    fn constant_template_is_rejected() {
        let g = GridGeometry::square(9).unwrap();
        let t = GridField::from_fn(g, |_, _| 2.0);
        assert!(fit_kernel_bandwidth(&t).is_err());
    }

    #[test]
    fn template_of_isolated_bumps() {
        let g = GridGeometry::square(64).unwrap();
        let f = GridField::from_fn(g, |r, c| {
            let a = ((r as f64 - 16.0).powi(2) + (c as f64 - 16.0).powi(2)) / (2.0 * 2.0 * 2.0);
            let b = ((r as f64 - 44.0).powi(2) + (c as f64 - 40.0).powi(2)) / (2.0 * 2.0 * 2.0);
            (-a).exp() + (-b).exp()
        });
        let t = average_peak_template(&f, 2, 6).unwrap();
        let gamma = fit_kernel_bandwidth(&t).unwrap();
        assert!((gamma - 2.0).abs() < 0.02, "{gamma}");
    }
}
