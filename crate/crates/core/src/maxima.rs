//! Candidate peaks (local maxima above a pre-threshold) and their
//! classification against the true signal, transition and null regions.

use serde::{Deserialize, Serialize};

use crate::field_model::signal::BOX_SLACK;
use crate::field_model::{GridField, GridGeometry, KernelSpec, PeakSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Inside the support of a true peak.
    Signal,
    /// Outside every true support but inside a smoothed one.
    Transition,
    /// Outside every smoothed support.
    Null,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Signal => "signal",
            Region::Transition => "transition",
            Region::Null => "null",
        }
    }
}

/// A local maximum of the smoothed field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePeak {
    /// `(row, col)` grid index.
    pub location: (usize, usize),
    /// `(x, y)` model coordinates.
    pub model_coords: (f64, f64),
    pub height: f64,
    pub pvalue: Option<f64>,
    pub region: Option<Region>,
    pub significant: bool,
}

/// Every grid point strictly above its 8 periodic neighbours with height
/// above `v`, sorted by descending height. Ties never produce a maximum.
pub fn find_local_maxima(field: &GridField, v: f64) -> Vec<CandidatePeak> {
    let (h, w) = (field.height() as isize, field.width() as isize);
    let vals = field.values();
    let mut out = Vec::new();
    for r in 0..h {
        let up = (r - 1).rem_euclid(h) * w;
        let mid = r * w;
        let down = (r + 1).rem_euclid(h) * w;
        for c in 0..w {
            let x = vals[(mid + c) as usize];
            if !(x > v) {
                continue;
            }
            let left = (c - 1).rem_euclid(w);
            let right = (c + 1).rem_euclid(w);
            let is_max = [up, mid, down].iter().all(|&row| {
                [left, c, right]
                    .iter()
                    .all(|&col| (row == mid && col == c) || x > vals[(row + col) as usize])
            });
            if is_max {
                let (ru, cu) = (r as usize, c as usize);
                out.push(CandidatePeak {
                    location: (ru, cu),
                    model_coords: field.geometry().coords(ru, cu),
                    height: x,
                    pvalue: None,
                    region: None,
                    significant: false,
                });
            }
        }
    }
    out.sort_by(|a, b| b.height.total_cmp(&a.height));
    out
}

/// Boolean masks of the true and smoothed signal supports on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub geometry: GridGeometry,
    /// `S₁ = ∪ S_j`
    pub signal: Vec<bool>,
    /// `S₁,γ = ∪ S_{j,γ}`
    pub smoothed_signal: Vec<bool>,
    /// `T_γ = S₁,γ \ S₁`
    pub transition: Vec<bool>,
    /// `S₀ = U \ S₁`
    pub null_region: Vec<bool>,
    /// `S_j` for each peak.
    pub per_peak: Vec<Vec<bool>>,
    /// Non-fatal problems found while building the masks.
    pub warnings: Vec<String>,
}

impl RegionMasks {
    pub fn num_peaks(&self) -> usize {
        self.per_peak.len()
    }

    /// Peaks with non-empty support.
    pub fn num_active_peaks(&self) -> usize {
        self.per_peak.iter().filter(|m| m.iter().any(|&b| b)).count()
    }

    /// Number of active peaks per unit area.
    pub fn a1(&self) -> f64 {
        self.num_active_peaks() as f64 / self.geometry.area()
    }

    /// Fraction of the domain covered by smoothed supports.
    pub fn a2_gamma(&self) -> f64 {
        self.smoothed_signal.iter().filter(|&&b| b).count() as f64 / self.geometry.len() as f64
    }

    pub fn region_at(&self, row: usize, col: usize) -> Region {
        let i = row * self.geometry.width + col;
        if self.signal[i] {
            Region::Signal
        } else if self.transition[i] {
            Region::Transition
        } else {
            Region::Null
        }
    }

    /// Writes the region of each candidate into its `region` field.
    pub fn label(&self, peaks: &mut [CandidatePeak]) {
        for p in peaks {
            p.region = Some(self.region_at(p.location.0, p.location.1));
        }
    }
}

/// Builds `S_j` (box of half-width `b_j c_j` about `τ_j`) and `S_{j,γ}` (that
/// box dilated by the kernel support `γd`). Boxes wrap periodically. A
/// zero-amplitude peak has empty support.
pub fn build_region_masks(peaks: &[PeakSpec], kernel: &KernelSpec, grid: &GridGeometry) -> RegionMasks {
    let n = grid.len();
    let mut signal = vec![false; n];
    let mut smoothed_signal = vec![false; n];
    let mut coverage = vec![0u16; n];
    let mut per_peak = Vec::with_capacity(peaks.len());

    for peak in peaks {
        if !peak.is_active() {
            per_peak.push(vec![false; n]);
            continue;
        }
        let r = peak.support_radius();
        let sj = box_mask(grid, peak.center, r);
        let sjg = box_mask(grid, peak.center, r + kernel.support_radius());
        for i in 0..n {
            signal[i] |= sj[i];
            smoothed_signal[i] |= sjg[i];
            coverage[i] += sjg[i] as u16;
        }
        per_peak.push(sj);
    }

    let mut warnings = Vec::new();
    let overlap = coverage.iter().filter(|&&k| k > 1).count();
    if overlap > 0 {
        warnings.push(format!("smoothed peak supports overlap on {overlap} grid points"));
    }

    let transition = smoothed_signal.iter().zip(&signal).map(|(&s, &t)| s && !t).collect();
    let null_region = signal.iter().map(|&s| !s).collect();
    RegionMasks {
        geometry: *grid,
        signal,
        smoothed_signal,
        transition,
        null_region,
        per_peak,
        warnings,
    }
}

fn box_mask(grid: &GridGeometry, center: (f64, f64), half: f64) -> Vec<bool> {
    let cols = wrapped_span(center.0 - half, center.0 + half, grid.origin.0, grid.spacing, grid.width);
    let rows = wrapped_span(center.1 - half, center.1 + half, grid.origin.1, grid.spacing, grid.height);
    let mut mask = vec![false; grid.len()];
    for &r in &rows {
        for &c in &cols {
            mask[r * grid.width + c] = true;
        }
    }
    mask
}

fn wrapped_span(lo: f64, hi: f64, origin: f64, spacing: f64, n: usize) -> Vec<usize> {
    let a = ((lo - origin) / spacing - BOX_SLACK).ceil() as isize;
    let b = ((hi - origin) / spacing + BOX_SLACK).floor() as isize;
    if b - a + 1 >= n as isize {
        return (0..n).collect();
    }
    (a..=b).map(|k| k.rem_euclid(n as isize) as usize).collect()
}

/// Discovery counts for a set of declared peaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    /// `V`: declared peaks outside every true support (transition included).
    pub false_discoveries: usize,
    /// `W = R − V`.
    pub true_discoveries: usize,
    /// Per true peak, whether at least one declared peak lies in its support.
    pub hits: Vec<bool>,
}

impl Classification {
    /// `R`
    pub fn discoveries(&self) -> usize {
        self.false_discoveries + self.true_discoveries
    }
}

/// Classifies the given (declared) peaks; callers pass only the significant ones.
pub fn classify_peaks<'a>(
    peaks: impl IntoIterator<Item = &'a CandidatePeak>,
    masks: &RegionMasks,
) -> Classification {
    let w = masks.geometry.width;
    let mut hits = vec![false; masks.num_peaks()];
    let (mut v, mut good) = (0, 0);
    for p in peaks {
        let i = p.location.0 * w + p.location.1;
        if masks.null_region[i] {
            v += 1;
        } else {
            good += 1;
            for (j, sj) in masks.per_peak.iter().enumerate() {
                hits[j] |= sj[i];
            }
        }
    }
    Classification {
        false_discoveries: v,
        true_discoveries: good,
        hits,
    }
}
