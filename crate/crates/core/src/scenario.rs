//! Generative description of a synthetic detection problem.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::field_model::{render_signal, GridField, GridGeometry, KernelSpec, NoiseSpec, PeakSpec};
use crate::maxima::{build_region_masks, RegionMasks};

fn unit_spacing() -> f64 {
    1.0
}

/// Square domain `[0, size)²` sampled every `spacing`, carrying a list of
/// peaks, a noise model, and the smoothing kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Domain side length `L` in model units.
    pub size: f64,
    #[serde(default = "unit_spacing")]
    pub spacing: f64,
    pub peaks: Vec<PeakSpec>,
    pub noise: NoiseSpec,
    pub kernel: KernelSpec,
}

impl ScenarioSpec {
    /// Nine truncated Gaussian peaks (`b = c = 3`) of amplitude `amplitude`
    /// at `(50 i, 50 k)`, `i, k ∈ {1, 2, 3}`, on a 200×200 unit grid.
    pub fn nine_peak_layout(amplitude: f64, nu: f64, gamma: f64) -> Self {
        let peaks = (1..=3)
            .flat_map(|i| {
                (1..=3).map(move |k| PeakSpec::new(amplitude, 3.0, 3.0, (50.0 * i as f64, 50.0 * k as f64)))
            })
            .collect();
        Self {
            size: 200.0,
            spacing: 1.0,
            peaks,
            noise: NoiseSpec::new(1.0, nu, 0),
            kernel: KernelSpec::new(gamma),
        }
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        if !(self.size.is_finite() && self.size > 0.0) {
            return domain(format!("size must be positive, got {}", self.size));
        }
        let n = (self.size / self.spacing).round();
        if !(n >= 3.0) {
            return domain(format!("size/spacing gives {n} points per side; need at least 3"));
        }
        GridGeometry::new(n as usize, n as usize, self.spacing)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.noise.validate()?;
        self.kernel.validate()?;
        for (j, p) in self.peaks.iter().enumerate() {
            p.validate()
                .map_err(|e| crate::StemError::Domain(format!("peak {j}: {e}")))?;
        }
        Ok(())
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        for p in &mut self.peaks {
            p.amplitude = amplitude;
        }
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.kernel.gamma = gamma;
        self
    }

    pub fn signal(&self) -> Result<GridField> {
        render_signal(&self.peaks, &self.geometry()?)
    }

    pub fn masks(&self) -> Result<RegionMasks> {
        Ok(build_region_masks(&self.peaks, &self.kernel, &self.geometry()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_geometry() {
        let s = ScenarioSpec::nine_peak_layout(55.0, 0.0, 3.0);
        s.validate().unwrap();
        let g = s.geometry().unwrap();
        assert_eq!((g.height, g.width), (200, 200));
        let masks = s.masks().unwrap();
        assert!(masks.warnings.is_empty());
        assert!((masks.a1() - 2.25e-4).abs() < 1e-18);
    }

    #[test]
    fn round_trips_through_json() {
        let s = ScenarioSpec::nine_peak_layout(35.0, 1.0, 2.5);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&text).unwrap(), s);
    }
}
