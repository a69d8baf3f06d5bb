use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::{GridField, GridGeometry};
use crate::error::{domain, Result};

/// One truncated Gaussian signal peak `a · b⁻² φ₂((t − τ)/b)` supported on
/// `(t − τ)/b ∈ [−c, c]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub amplitude: f64,
    pub scale: f64,
    pub truncation: f64,
    /// Model coordinates `(x, y)` of the mode.
    pub center: (f64, f64),
}

impl PeakSpec {
    pub fn new(amplitude: f64, scale: f64, truncation: f64, center: (f64, f64)) -> Self {
        Self {
            amplitude,
            scale,
            truncation,
            center,
        }
    }

    /// A zero amplitude is accepted and describes an inactive peak with empty
    /// support.
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return domain(format!("peak amplitude must be non-negative, got {}", self.amplitude));
        }
        for (name, v) in [
            ("scale", self.scale),
            ("truncation", self.truncation),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("peak {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.amplitude > 0.0
    }

    /// Half-width of the support box in model units.
    pub fn support_radius(&self) -> f64 {
        self.scale * self.truncation
    }

    /// Unit-amplitude shape `h(t)` at model point `(x, y)`.
    pub fn shape_at(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.center.0) / self.scale;
        let dy = (y - self.center.1) / self.scale;
        let c = self.truncation + BOX_SLACK;
        if dx.abs() > c || dy.abs() > c {
            return 0.0;
        }
        (-(dx * dx + dy * dy) / 2.0).exp() / (2.0 * PI * self.scale * self.scale)
    }

    /// Peak height `h_γ(τ) = 1 / (2π(γ² + b²))` of the shape after Gaussian
    /// smoothing, ignoring truncation.
    pub fn smoothed_height(&self, gamma: f64) -> f64 {
        1.0 / (2.0 * PI * (gamma * gamma + self.scale * self.scale))
    }
}

// Grid points that land on the box edge up to rounding belong to the support.
pub(crate) const BOX_SLACK: f64 = 1e-9;

/// Samples `μ(t) = Σ a_j h_j(t)` on the grid. Each peak's support box must lie
/// inside the grid extent.
pub fn render_signal(peaks: &[PeakSpec], grid: &GridGeometry) -> Result<GridField> {
    grid.validate()?;
    let (x_max, y_max) = grid.coords(grid.height - 1, grid.width - 1);
    let (x_min, y_min) = grid.origin;
    let tol = BOX_SLACK * grid.spacing.max(1.0);

    let mut field = GridField::zeros(*grid);
    for (j, peak) in peaks.iter().enumerate() {
        peak.validate().map_err(|e| crate::StemError::Domain(format!("peak {j}: {e}")))?;
        let r = peak.support_radius();
        let (cx, cy) = peak.center;
        if cx - r < x_min - tol || cx + r > x_max + tol || cy - r < y_min - tol || cy + r > y_max + tol {
            return domain(format!(
                "peak {j} support [{:.3}, {:.3}]x[{:.3}, {:.3}] exceeds grid extent [{x_min}, {x_max}]x[{y_min}, {y_max}]",
                cx - r,
                cx + r,
                cy - r,
                cy + r
            ));
        }
        let (r0, r1) = index_span(cy - r, cy + r, y_min, grid.spacing, grid.height);
        let (c0, c1) = index_span(cx - r, cx + r, x_min, grid.spacing, grid.width);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (x, y) = grid.coords(row, col);
                let v = field.get(row, col) + peak.amplitude * peak.shape_at(x, y);
                field.set(row, col, v);
            }
        }
    }
    Ok(field)
}

/// Inclusive index range of lattice points in `[lo, hi]`.
pub(crate) fn index_span(lo: f64, hi: f64, origin: f64, spacing: f64, n: usize) -> (usize, usize) {
    let a = ((lo - origin) / spacing - BOX_SLACK).ceil().max(0.0) as usize;
    let b = (((hi - origin) / spacing + BOX_SLACK).floor() as usize).min(n - 1);
    (a, b)
}
