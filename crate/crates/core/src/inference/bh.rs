use super::pvalues::PValueLaw;
use crate::error::{domain, Result};
use crate::maxima::CandidatePeak;

/// Result of the Benjamini–Hochberg step-up rule on `m` p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    /// Largest `i` with `p_(i) < iα/m`; zero when nothing is rejected.
    pub k: usize,
    /// `kα/m`, or 1 when `m = 0`.
    pub pvalue_cutoff: f64,
    /// Height threshold equivalent to the p-value cutoff. `+∞` when `k = 0`;
    /// `None` when no height law was supplied.
    pub height_threshold: Option<f64>,
    /// Aligned with the input order.
    pub rejected: Vec<bool>,
}

impl BhOutcome {
    pub fn num_tests(&self) -> usize {
        self.rejected.len()
    }
}

/// Step-up BH with strict inequality. Sorts a private copy of the input.
pub fn bh_procedure(pvalues: &[f64], alpha: f64) -> Result<BhOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return domain(format!("p-value {p} outside [0, 1]"));
    }
    let m = pvalues.len();
    if m == 0 {
        return Ok(BhOutcome {
            k: 0,
            pvalue_cutoff: 1.0,
            height_threshold: Some(f64::INFINITY),
            rejected: Vec::new(),
        });
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted
        .iter()
        .enumerate()
        .rev()
        .find(|&(i, &p)| p < (i + 1) as f64 * alpha / m as f64)
        .map_or(0, |(i, _)| i + 1);
    let pvalue_cutoff = k as f64 * alpha / m as f64;
    Ok(BhOutcome {
        k,
        pvalue_cutoff,
        height_threshold: (k == 0).then_some(f64::INFINITY),
        rejected: pvalues.iter().map(|&p| p < pvalue_cutoff).collect(),
    })
}

/// Runs BH on candidates whose p-values are set, marks the rejected ones
/// `significant`, and resolves the height threshold under `law`.
pub fn stem_test(peaks: &mut [CandidatePeak], law: &PValueLaw, alpha: f64) -> Result<BhOutcome> {
    let pvalues = peaks
        .iter()
        .map(|p| p.pvalue.ok_or_else(|| crate::StemError::Invalid("candidate without p-value".into())))
        .collect::<Result<Vec<_>>>()?;
    let mut outcome = bh_procedure(&pvalues, alpha)?;
    for (p, &r) in peaks.iter_mut().zip(&outcome.rejected) {
        p.significant = r;
    }
    if outcome.k > 0 {
        outcome.height_threshold = Some(law.height_for_pvalue(outcome.pvalue_cutoff)?);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_enumerated_example() {
        let out = bh_procedure(&[0.001, 0.02, 0.9], 0.05).unwrap();
        assert_eq!(out.k, 2);
        assert_eq!(out.rejected, vec![true, true, false]);
        assert!((out.pvalue_cutoff - 2.0 * 0.05 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nothing_below_alpha() {
        let out = bh_procedure(&[0.05, 0.5, 0.07, 1.0], 0.05).unwrap();
        assert_eq!(out.k, 0);
        assert!(out.rejected.iter().all(|&r| !r));
        assert_eq!(out.height_threshold, Some(f64::INFINITY));
    }

    #[test]
    fn empty_input() {
        let out = bh_procedure(&[], 0.05).unwrap();
        assert_eq!(out.k, 0);
        assert_eq!(out.pvalue_cutoff, 1.0);
    }

    #[test]
    fn boundary_ties_are_not_rejected() {
        // p_(1) equals α/m exactly
        let out = bh_procedure(&[0.025, 0.9], 0.05).unwrap();
        assert_eq!(out.k, 0);
    }

    #[test]
    fn step_up_rescues_earlier_failures() {
        // p_(1) = 0.02 > 0.05/4 but p_(4) = 0.04 < 0.05
        let out = bh_procedure(&[0.04, 0.02, 0.03, 0.035], 0.05).unwrap();
        assert_eq!(out.k, 4);
    }

    #[test]
    fn invalid_inputs() {
        assert!(bh_procedure(&[0.1], 0.0).is_err());
        assert!(bh_procedure(&[1.1], 0.05).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(ps in prop::collection::vec(0.0f64..1.0, 0..40), seed in any::<u64>()) {
            let out = bh_procedure(&ps, 0.1).unwrap();
            let mut idx: Vec<usize> = (0..ps.len()).collect();
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<f64> = idx.iter().map(|&i| ps[i]).collect();
            let out2 = bh_procedure(&permuted, 0.1).unwrap();
            prop_assert_eq!(out.k, out2.k);
            for (j, &i) in idx.iter().enumerate() {
                prop_assert_eq!(out.rejected[i], out2.rejected[j]);
            }
        }

        #[test]
        fn monotone_in_alpha(ps in prop::collection::vec(0.0f64..1.0, 0..40), a in 0.001f64..0.5, da in 0.0f64..0.49) {
            let k1 = bh_procedure(&ps, a).unwrap().k;
            let k2 = bh_procedure(&ps, a + da).unwrap().k;
            prop_assert!(k2 >= k1);
        }

        #[test]
        fn monotone_in_each_pvalue(ps in prop::collection::vec(0.0f64..0.2, 1..40), j in any::<prop::sample::Index>(), f in 0.0f64..1.0) {
            let k1 = bh_procedure(&ps, 0.1).unwrap().k;
            let mut lowered = ps.clone();
            let j = j.index(ps.len());
            lowered[j] *= f;
            prop_assert!(bh_procedure(&lowered, 0.1).unwrap().k >= k1);
        }

        #[test]
        fn rejection_count_and_cutoff(ps in prop::collection::vec(0.0f64..1.0, 0..40)) {
            let out = bh_procedure(&ps, 0.2).unwrap();
            prop_assert_eq!(out.rejected.iter().filter(|&&r| r).count(), out.k);
            for (p, r) in ps.iter().zip(&out.rejected) {
                if *r { prop_assert!(*p < out.pvalue_cutoff); }
            }
        }
    }
}
