use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{IsotropicHeightLaw, OvershootLaw, TabulatedTail};
use crate::error::{domain, Result};
use crate::maxima::CandidatePeak;

/// P-values below this are reported as this value.
pub const PVALUE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMode {
    /// Exact isotropic height distribution, conditioned on exceeding `v`.
    #[default]
    #[serde(alias = "exact-isotropic")]
    Exact,
    /// Hermite-ratio overshoot approximation; needs `v > 0`.
    Overshoot,
}

impl std::str::FromStr for PValueMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exact-isotropic" | "exact_isotropic" => Ok(Self::Exact),
            "overshoot" => Ok(Self::Overshoot),
            other => Err(format!("unknown p-value mode '{other}' (expected exact|overshoot)")),
        }
    }
}

/// Conditional null law of a maximum's height given it exceeds the
/// pre-threshold, in one of the two supported forms.
#[derive(Debug, Clone, PartialEq)]
pub enum PValueLaw {
    Exact {
        law: IsotropicHeightLaw,
        pre_threshold: f64,
        tail_at_v: f64,
        /// Interpolation table used in place of quadrature, if built.
        table: Option<Arc<TabulatedTail>>,
    },
    Overshoot(OvershootLaw),
}

impl PValueLaw {
    pub fn exact(law: IsotropicHeightLaw, pre_threshold: f64) -> Result<Self> {
        let tail_at_v = law.tail(pre_threshold);
        if !(tail_at_v > PVALUE_FLOOR) {
            return domain(format!("F(v) underflows at v={pre_threshold}"));
        }
        Ok(Self::Exact {
            law,
            pre_threshold,
            tail_at_v,
            table: None,
        })
    }

    /// Evaluates exact p-values from an interpolation table (relative error
    /// below 1e-9), which pays off when one law serves many candidates.
    pub fn tabulated(self) -> Self {
        match self {
            Self::Exact {
                law,
                pre_threshold,
                tail_at_v,
                ..
            } => Self::Exact {
                law,
                pre_threshold,
                tail_at_v,
                table: Some(Arc::new(TabulatedTail::new(law))),
            },
            other => other,
        }
    }

    /// Overshoot law of a planar field.
    pub fn overshoot(sigma_gamma: f64, pre_threshold: f64) -> Result<Self> {
        if !(pre_threshold > 0.0) {
            return domain(format!(
                "overshoot p-values need a positive pre-threshold, got {pre_threshold}"
            ));
        }
        Ok(Self::Overshoot(OvershootLaw::new(sigma_gamma, 2, pre_threshold)?))
    }

    pub fn for_mode(mode: PValueMode, law: IsotropicHeightLaw, pre_threshold: f64) -> Result<Self> {
        match mode {
            PValueMode::Exact => Self::exact(law, pre_threshold),
            PValueMode::Overshoot => Self::overshoot(law.sigma_gamma(), pre_threshold),
        }
    }

    pub fn mode(&self) -> PValueMode {
        match self {
            Self::Exact { .. } => PValueMode::Exact,
            Self::Overshoot(_) => PValueMode::Overshoot,
        }
    }

    pub fn pre_threshold(&self) -> f64 {
        match self {
            Self::Exact { pre_threshold, .. } => *pre_threshold,
            Self::Overshoot(o) => o.pre_threshold(),
        }
    }

    /// P-value of a maximum of the given height (which must be ≥ `v`).
    pub fn pvalue(&self, height: f64) -> Result<f64> {
        let p = match self {
            Self::Exact {
                law,
                pre_threshold,
                tail_at_v,
                table,
            } => {
                if height < *pre_threshold {
                    return domain(format!("height {height} below pre-threshold {pre_threshold}"));
                }
                let f = table.as_ref().map_or_else(|| law.tail(height), |t| t.tail(height));
                (f / tail_at_v).clamp(0.0, 1.0)
            }
            Self::Overshoot(o) => o.k(height)?,
        };
        Ok(p.max(PVALUE_FLOOR))
    }

    /// Height at which the p-value equals `p`: the threshold `ũ` such that
    /// `pvalue(y) < p ⟺ y > ũ`.
    pub fn height_for_pvalue(&self, p: f64) -> Result<f64> {
        if p >= 1.0 {
            return Ok(self.pre_threshold());
        }
        match self {
            Self::Exact {
                law,
                tail_at_v,
                table,
                ..
            } => match table {
                Some(t) => t.inverse_tail(p * tail_at_v),
                None => law.inverse_tail(p * tail_at_v),
            },
            Self::Overshoot(o) => o.inverse(p),
        }
    }
}

/// Sets `pvalue` on every candidate. Candidates must lie above the pre-threshold.
pub fn compute_pvalues(peaks: &mut [CandidatePeak], law: &PValueLaw) -> Result<()> {
    let v = law.pre_threshold();
    if let Some(p) = peaks.iter().find(|p| !(p.height > v)) {
        return domain(format!("candidate height {} is not above pre-threshold {v}", p.height));
    }
    for p in peaks.iter_mut() {
        p.pvalue = Some(law.pvalue(p.height)?);
    }
    Ok(())
}
