//! Discrete Gaussian kernels and periodic (torus) convolution.
//!
//! Three interchangeable algorithms are provided. They agree to rounding
//! error on any grid the kernel footprint fits in; `Separable` is the
//! default because every kernel built here is a product of 1-D taps.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::GridField;
use crate::error::{domain, Result};

/// Default support half-width of the smoothing kernel, in units of its bandwidth.
pub const DEFAULT_KERNEL_TRUNCATION: f64 = 3.0;

/// Isotropic Gaussian smoothing kernel `w_γ(t) = γ^{-2} φ₂(t/γ)` restricted to
/// the box `[-γd, γd]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: f64,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_truncation() -> f64 {
    DEFAULT_KERNEL_TRUNCATION
}

impl KernelSpec {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            truncation: DEFAULT_KERNEL_TRUNCATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return domain(format!("kernel bandwidth must be positive, got {}", self.gamma));
        }
        if !(self.truncation.is_finite() && self.truncation > 0.0) {
            return domain(format!(
                "kernel truncation must be positive, got {}",
                self.truncation
            ));
        }
        Ok(())
    }

    /// Half-width of the kernel support in model units.
    pub fn support_radius(&self) -> f64 {
        self.gamma * self.truncation
    }

    /// Samples the kernel on a lattice of the given spacing.
    pub fn discretize(&self, spacing: f64) -> Result<DiscreteKernel> {
        self.validate()?;
        Ok(DiscreteKernel::gaussian(self.gamma, self.support_radius(), spacing))
    }
}

/// A separable, symmetric kernel: the same odd-length 1-D tap vector applied
/// along both axes. Taps sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    taps: Vec<f64>,
}

impl DiscreteKernel {
    /// Gaussian of standard deviation `scale` sampled at multiples of
    /// `spacing` within `[-radius, radius]`, renormalized to unit sum.
    pub fn gaussian(scale: f64, radius: f64, spacing: f64) -> Self {
        // 1e-9 slack keeps integer-multiple radii (γd = 9 on a unit grid) inclusive
        let half = ((radius / spacing) + 1e-9).floor() as isize;
        let mut taps: Vec<f64> = (-half..=half)
            .map(|k| {
                let x = k as f64 * spacing / scale;
                (-0.5 * x * x).exp()
            })
            .collect();
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);
        Self { taps }
    }

    pub fn from_taps(taps: Vec<f64>) -> Self {
        assert!(taps.len() % 2 == 1, "kernel taps must have odd length");
        Self { taps }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Half-width in grid steps.
    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    /// Footprint edge length in grid steps.
    pub fn footprint(&self) -> usize {
        self.taps.len()
    }

    /// Outer product of the taps as a dense 2-D kernel.
    pub fn to_2d(&self) -> Kernel2d {
        let n = self.taps.len();
        let mut weights = Vec::with_capacity(n * n);
        for &a in &self.taps {
            for &b in &self.taps {
                weights.push(a * b);
            }
        }
        Kernel2d {
            half_rows: n / 2,
            half_cols: n / 2,
            weights,
        }
    }

    /// Sum of squared 2-D weights; the variance of unit white noise after filtering.
    pub fn energy(&self) -> f64 {
        let s: f64 = self.taps.iter().map(|t| t * t).sum();
        s * s
    }
}

/// Dense 2-D kernel with odd extents, centered at `(half_rows, half_cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    pub half_rows: usize,
    pub half_cols: usize,
    pub weights: Vec<f64>,
}

impl Kernel2d {
    pub fn rows(&self) -> usize {
        2 * self.half_rows + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.half_cols + 1
    }

    #[inline]
    fn at(&self, di: isize, dj: isize) -> f64 {
        let r = (di + self.half_rows as isize) as usize;
        let c = (dj + self.half_cols as isize) as usize;
        self.weights[r * self.cols() + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionMethod {
    Direct,
    #[default]
    Separable,
    Fft,
}

fn check_fits(field: &GridField, rows: usize, cols: usize) -> Result<()> {
    if rows > field.height() || cols > field.width() {
        return domain(format!(
            "kernel footprint {}x{} exceeds grid {}x{}",
            rows,
            cols,
            field.height(),
            field.width()
        ));
    }
    Ok(())
}

/// Periodic convolution with a separable kernel using the requested algorithm.
pub fn convolve(field: &GridField, kernel: &DiscreteKernel, method: ConvolutionMethod) -> Result<GridField> {
    match method {
        ConvolutionMethod::Separable => convolve_separable(field, kernel),
        ConvolutionMethod::Direct => convolve_direct(field, &kernel.to_2d()),
        ConvolutionMethod::Fft => convolve_fft(field, &kernel.to_2d()),
    }
}

/// Two 1-D periodic passes, rows then columns.
pub fn convolve_separable(field: &GridField, kernel: &DiscreteKernel) -> Result<GridField> {
    let n = kernel.footprint();
    check_fits(field, n, n)?;
    let (h, w) = (field.height(), field.width());
    let half = kernel.half_width();
    let taps = kernel.taps();

    let mut tmp = vec![0.0; h * w];
    let mut padded = vec![0.0; w.max(h) + 2 * half];
    for r in 0..h {
        let row = &field.values()[r * w..(r + 1) * w];
        fill_periodic(&mut padded[..w + 2 * half], row, half);
        filter_line(&padded[..w + 2 * half], taps, &mut tmp[r * w..(r + 1) * w]);
    }

    let mut out = GridField::zeros(*field.geometry());
    let mut column = vec![0.0; h];
    let mut filtered = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            column[r] = tmp[r * w + c];
        }
        fill_periodic(&mut padded[..h + 2 * half], &column, half);
        filter_line(&padded[..h + 2 * half], taps, &mut filtered);
        for r in 0..h {
            out.set(r, c, filtered[r]);
        }
    }
    Ok(out)
}

fn fill_periodic(dst: &mut [f64], src: &[f64], half: usize) {
    let n = src.len();
    for (i, d) in dst.iter_mut().enumerate() {
        let k = (i as isize - half as isize).rem_euclid(n as isize) as usize;
        *d = src[k];
    }
}

// out[i] = Σ_k taps[k] · padded[i + 2·half − k]; taps are symmetric in practice,
// but the index flip keeps this a true convolution for any taps.
fn filter_line(padded: &[f64], taps: &[f64], out: &mut [f64]) {
    let n = taps.len();
    for (i, o) in out.iter_mut().enumerate() {
        let window = &padded[i..i + n];
        *o = taps
            .iter()
            .zip(window.iter().rev())
            .map(|(t, x)| t * x)
            .sum();
    }
}

/// Textbook periodic convolution, `O(HW · footprint)`.
pub fn convolve_direct(field: &GridField, kernel: &Kernel2d) -> Result<GridField> {
    check_fits(field, kernel.rows(), kernel.cols())?;
    let hr = kernel.half_rows as isize;
    let hc = kernel.half_cols as isize;
    let mut out = GridField::zeros(*field.geometry());
    for r in 0..field.height() {
        for c in 0..field.width() {
            let mut acc = 0.0;
            for di in -hr..=hr {
                for dj in -hc..=hc {
                    acc += kernel.at(di, dj) * field.get_wrapped(r as isize - di, c as isize - dj);
                }
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Periodic convolution through the 2-D discrete Fourier transform.
pub fn convolve_fft(field: &GridField, kernel: &Kernel2d) -> Result<GridField> {
    check_fits(field, kernel.rows(), kernel.cols())?;
    let (h, w) = (field.height(), field.width());

    let mut data: Vec<Complex<f64>> = field.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut kern = vec![Complex::new(0.0, 0.0); h * w];
    let hr = kernel.half_rows as isize;
    let hc = kernel.half_cols as isize;
    for di in -hr..=hr {
        for dj in -hc..=hc {
            let r = di.rem_euclid(h as isize) as usize;
            let c = dj.rem_euclid(w as isize) as usize;
            kern[r * w + c].re += kernel.at(di, dj);
        }
    }

    let mut planner = FftPlanner::new();
    fft2(&mut planner, &mut data, h, w, false);
    fft2(&mut planner, &mut kern, h, w, false);
    for (d, k) in data.iter_mut().zip(&kern) {
        *d *= k;
    }
    fft2(&mut planner, &mut data, h, w, true);

    let scale = 1.0 / (h * w) as f64;
    Ok(GridField::from_fn(*field.geometry(), |r, c| data[r * w + c].re * scale))
}

fn fft2(planner: &mut FftPlanner<f64>, data: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = data[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            data[r * w + c] = column[r];
        }
    }
}

/// Integral of the squared continuous Gaussian kernel of bandwidth `scale`
/// over the plane, `1 / (4π scale²)`.
pub fn gaussian_energy(scale: f64) -> f64 {
    1.0 / (4.0 * PI * scale * scale)
}
