//! Sampled 2-D fields on a regular lattice.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, StemError};

/// Geometry of a rectangular lattice: `height` rows by `width` columns,
/// with element `(r, c)` sitting at model coordinates
/// `(origin.0 + c * spacing, origin.1 + r * spacing)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub height: usize,
    pub width: usize,
    pub spacing: f64,
    pub origin: (f64, f64),
}

impl GridGeometry {
    pub fn new(height: usize, width: usize, spacing: f64) -> Result<Self> {
        let geom = Self {
            height,
            width,
            spacing,
            origin: (0.0, 0.0),
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Square `size`×`size` grid with unit spacing.
    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size, 1.0)
    }

    pub fn with_origin(mut self, origin: (f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 3 || self.width < 3 {
            return domain(format!(
                "grid must be at least 3x3, got {}x{}",
                self.height, self.width
            ));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return domain(format!("grid spacing must be positive, got {}", self.spacing));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Model coordinates `(x, y)` of grid element `(row, col)`.
    pub fn coords(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + col as f64 * self.spacing,
            self.origin.1 + row as f64 * self.spacing,
        )
    }

    /// Area covered by the grid in model units.
    pub fn area(&self) -> f64 {
        self.len() as f64 * self.spacing * self.spacing
    }
}

/// A real-valued field sampled on a [`GridGeometry`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            values: vec![0.0; geometry.len()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(StemError::Invalid(format!(
                "expected {} values for a {}x{} grid, got {}",
                geometry.len(),
                geometry.height,
                geometry.width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(StemError::Invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { geometry, values })
    }

    /// Builds a field by evaluating `f(row, col)` at every element.
    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for r in 0..geometry.height {
            for c in 0..geometry.width {
                values.push(f(r, c));
            }
        }
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn spacing(&self) -> f64 {
        self.geometry.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.geometry.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.geometry.width + col] = value;
    }

    /// Value at a signed offset from `(row, col)` with periodic wrap-around.
    #[inline]
    pub fn get_wrapped(&self, row: isize, col: isize) -> f64 {
        let h = self.geometry.height as isize;
        let w = self.geometry.width as isize;
        self.get(row.rem_euclid(h) as usize, col.rem_euclid(w) as usize)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            geometry: self.geometry,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.height() != other.height() || self.width() != other.width() {
            return Err(StemError::Invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.height(),
                self.width(),
                other.height(),
                other.width()
            )));
        }
        Ok(Self {
            geometry: self.geometry,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance of all values.
    pub fn variance(&self) -> f64 {
        sample_variance(self.values.iter().copied())
    }

    /// Location `(row, col)` and value of the largest element (first on ties).
    pub fn argmax(&self) -> (usize, usize, f64) {
        let (idx, &v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| {
                if *cur.1 > *best.1 {
                    cur
                } else {
                    best
                }
            });
        (idx / self.width(), idx % self.width(), v)
    }
}

pub(crate) fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    ss / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(GridGeometry::new(2, 10, 1.0).is_err());
        assert!(GridGeometry::new(3, 3, 0.0).is_err());
        assert!(GridGeometry::new(3, 3, 1.0).is_ok());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = GridGeometry::square(3).unwrap();
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(GridField::from_values(g, v).is_err());
    }

    #[test]
    fn wrapped_access() {
        let g = GridGeometry::new(3, 4, 1.0).unwrap();
        let f = GridField::from_fn(g, |r, c| (r * 10 + c) as f64);
        assert_eq!(f.get_wrapped(-1, -1), 23.0);
        assert_eq!(f.get_wrapped(3, 4), 0.0);
    }

    #[test]
    fn coords_follow_spacing_and_origin() {
        let g = GridGeometry::new(5, 5, 0.5).unwrap().with_origin((-1.0, 2.0));
        assert_eq!(g.coords(2, 4), (1.0, 3.0));
    }
}
