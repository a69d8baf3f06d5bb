//! Monte Carlo estimation of realized FDR and power, with theoretical
//! overlays, over a fixed scenario or a one-parameter sweep.
//!
//! Replication `r` draws its noise from a seed derived from
//! `(master_seed, r)` only, so every grid point of a sweep sees the same
//! noise realizations. Outcomes are aggregated in replication order, which
//! makes serial and parallel runs bit-identical.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::IsotropicHeightLaw;
use crate::error::{domain, Result};
use crate::field_model::{closed_form_moments, estimate_moments, generate_noise, smooth, GridField, KernelSpec};
use crate::inference::{
    compute_pvalues, power_approx, stem_test, theoretical_fdr, FdrVariant, PValueLaw, PValueMode, TheoryParams,
};
use crate::maxima::{classify_peaks, find_local_maxima, RegionMasks};
use crate::scenario::ScenarioSpec;

/// Where the null moments used for p-values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSource {
    /// Closed-form moments of the generating model.
    #[default]
    ClosedForm,
    /// Estimated per replication from the smoothed noise.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[serde(alias = "GAMMA")]
    Gamma,
    /// Pre-threshold in units of `σ_γ`.
    #[serde(alias = "V")]
    V,
    /// Common amplitude of all peaks.
    #[serde(alias = "AMPLITUDE")]
    Amplitude,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Self::Gamma),
            "v" => Ok(Self::V),
            "amplitude" | "a" => Ok(Self::Amplitude),
            other => Err(format!("unknown sweep axis '{other}' (expected gamma|v|amplitude)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

fn default_alpha() -> f64 {
    0.05
}

fn no_pre_threshold() -> f64 {
    f64::NEG_INFINITY
}

fn default_replications() -> usize {
    100
}

/// Monte Carlo settings that do not describe the scenario itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Pre-threshold in units of `σ_γ`; `-inf` keeps every local maximum.
    #[serde(default = "no_pre_threshold")]
    pub v: f64,
    #[serde(default)]
    pub mode: PValueMode,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub moments: MomentSource,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            v: no_pre_threshold(),
            mode: PValueMode::default(),
            replications: default_replications(),
            master_seed: 0,
            moments: MomentSource::default(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub settings: ExperimentSettings,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, settings: ExperimentSettings) -> Self {
        Self { scenario, settings }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let s = &self.settings;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", s.alpha));
        }
        let sweeps_v = s.sweep.as_ref().is_some_and(|sw| sw.axis == SweepAxis::V);
        if !sweeps_v {
            self.validate_point()?;
        }
        if s.replications == 0 {
            return domain("replications must be at least 1");
        }
        if let Some(sweep) = &s.sweep {
            if sweep.grid.is_empty() {
                return domain("sweep grid is empty");
            }
            if sweep.grid.windows(2).any(|w| !(w[1] > w[0])) {
                return domain("sweep grid must be strictly increasing");
            }
            for &x in &sweep.grid {
                self.at(sweep.axis, x).validate_point()?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        self.scenario.validate()?;
        let v = self.settings.v;
        if v.is_nan() || v == f64::INFINITY {
            return domain(format!("pre-threshold must be finite or -inf, got {v}"));
        }
        if self.settings.mode == PValueMode::Overshoot && !(v > 0.0) {
            return domain(format!("overshoot p-values need v > 0, got {v}"));
        }
        Ok(())
    }

    /// The configuration at one point of a sweep, without the sweep.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Self {
        let mut c = self.clone();
        c.settings.sweep = None;
        match axis {
            SweepAxis::Gamma => c.scenario.kernel.gamma = value,
            SweepAxis::V => c.settings.v = value,
            SweepAxis::Amplitude => c.scenario = c.scenario.with_amplitude(value),
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// What one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// `V`
    pub false_discoveries: usize,
    /// `R`
    pub discoveries: usize,
    /// Per true peak, whether it was detected.
    pub hits: Vec<bool>,
    /// `m̃`
    pub num_candidates: usize,
    /// `ũ_BH`, or `None` when nothing was rejected.
    pub height_threshold: Option<f64>,
    /// `σ_γ` used for the p-values.
    pub sigma_gamma: f64,
}

impl ReplicationOutcome {
    pub fn fdp(&self) -> f64 {
        self.false_discoveries as f64 / self.discoveries.max(1) as f64
    }

    /// Fraction of true peaks detected; 0 when there are none.
    pub fn power(&self) -> f64 {
        if self.hits.is_empty() {
            0.0
        } else {
            self.hits.iter().filter(|&&h| h).count() as f64 / self.hits.len() as f64
        }
    }
}

/// Aggregate over replications at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub sweep_value: Option<f64>,
    pub replications: usize,
    pub realized_fdr: f64,
    pub fdr_stderr: f64,
    pub realized_power: f64,
    pub power_stderr: f64,
    /// Leading-order FDR bound; NaN when undefined (e.g. no active peaks).
    pub theoretical_fdr: f64,
    /// Mean of `Φ((a_j M_j − u)/σ_γ)` at the deterministic threshold; NaN when undefined.
    pub theoretical_power: f64,
    pub mean_num_candidates: f64,
}

/// Seed of replication `rep`: a SplitMix64 mix of the master seed and index.
pub fn replication_seed(master_seed: u64, rep: u64) -> u64 {
    let mut z = master_seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything about one configuration that does not depend on the noise.
struct Plan {
    config: ExperimentConfig,
    kernel: KernelSpec,
    smoothed_signal: GridField,
    masks: RegionMasks,
    fixed_law: Option<PValueLaw>,
    closed_form_sigma: f64,
}

impl Plan {
    fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate_point()?;
        let sc = &config.scenario;
        let kernel = sc.kernel;
        let smoothed_signal = smooth(&sc.signal()?, &kernel)?;
        let masks = sc.masks()?;
        let law = closed_form_law(sc)?;
        let fixed_law = match config.settings.moments {
            MomentSource::ClosedForm => Some(pvalue_law(&config, law)?.tabulated()),
            MomentSource::Estimate => None,
        };
        Ok(Self {
            kernel,
            smoothed_signal,
            masks,
            fixed_law,
            closed_form_sigma: law.sigma_gamma(),
            config,
        })
    }

    fn replicate(&self, smoothed_noise: &GridField) -> Result<ReplicationOutcome> {
        let s = &self.config.settings;
        let estimated;
        let law = match &self.fixed_law {
            Some(l) => l,
            None => {
                let m = estimate_moments(smoothed_noise, None)?;
                estimated = pvalue_law(&self.config, IsotropicHeightLaw::from_moments(&m)?)?;
                &estimated
            }
        };
        let sigma_gamma = match law {
            PValueLaw::Exact { law, .. } => law.sigma_gamma(),
            PValueLaw::Overshoot(o) => o.sigma_gamma(),
        };
        let y = self.smoothed_signal.add(smoothed_noise)?;
        let mut cands = find_local_maxima(&y, law.pre_threshold());
        compute_pvalues(&mut cands, law)?;
        let bh = stem_test(&mut cands, law, s.alpha)?;
        let cls = classify_peaks(cands.iter().filter(|c| c.significant), &self.masks);
        Ok(ReplicationOutcome {
            false_discoveries: cls.false_discoveries,
            discoveries: cls.discoveries(),
            hits: cls.hits,
            num_candidates: cands.len(),
            height_threshold: if bh.k > 0 { bh.height_threshold } else { None },
            sigma_gamma,
        })
    }

    fn theory(&self) -> (f64, f64) {
        self.try_theory().unwrap_or((f64::NAN, f64::NAN))
    }

    fn try_theory(&self) -> Result<(f64, f64)> {
        let sc = &self.config.scenario;
        let s = &self.config.settings;
        let m = closed_form_moments(sc.kernel.gamma, sc.noise.nu, sc.noise.sigma)?;
        let law = IsotropicHeightLaw::from_moments(&m)?;
        let params = TheoryParams::new(s.alpha, self.masks.a1(), self.masks.a2_gamma(), law, m.lambda_det)?;
        let v = s.v * self.closed_form_sigma;
        let (fdr, u) = match s.mode {
            PValueMode::Exact => (theoretical_fdr(&params, FdrVariant::BhExact(v))?, params.u_star(v)?),
            PValueMode::Overshoot => (
                theoretical_fdr(&params, FdrVariant::BhOvershoot(v))?,
                params.u_double_star(v)?,
            ),
        };
        let mut total = 0.0;
        for p in &sc.peaks {
            total += power_approx(u, p.amplitude, p.smoothed_height(sc.kernel.gamma), law.sigma_gamma())?;
        }
        let power = if sc.peaks.is_empty() { f64::NAN } else { total / sc.peaks.len() as f64 };
        Ok((fdr, power))
    }
}

fn closed_form_law(sc: &ScenarioSpec) -> Result<IsotropicHeightLaw> {
    let m = closed_form_moments(sc.kernel.gamma, sc.noise.nu, sc.noise.sigma)?;
    IsotropicHeightLaw::from_moments(&m)
}

fn pvalue_law(config: &ExperimentConfig, law: IsotropicHeightLaw) -> Result<PValueLaw> {
    let v = config.settings.v * law.sigma_gamma();
    PValueLaw::for_mode(config.settings.mode, law, v)
}

fn noise_for(config: &ExperimentConfig, rep: usize) -> Result<GridField> {
    let sc = &config.scenario;
    let spec = sc.noise.with_seed(replication_seed(config.settings.master_seed, rep as u64));
    generate_noise(&spec, &sc.geometry()?)
}

fn map_reps<T: Send>(n: usize, exec: Execution, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    match exec {
        Execution::Serial => (0..n).map(f).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

fn mean_and_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(plan: &Plan, outcomes: &[ReplicationOutcome], sweep_value: Option<f64>) -> ExperimentResult {
    let (realized_fdr, fdr_stderr) = mean_and_stderr(outcomes.iter().map(|o| o.fdp()));
    let (realized_power, power_stderr) = mean_and_stderr(outcomes.iter().map(|o| o.power()));
    let mean_num_candidates = outcomes.iter().map(|o| o.num_candidates as f64).sum::<f64>() / outcomes.len() as f64;
    let (theoretical_fdr, theoretical_power) = plan.theory();
    ExperimentResult {
        sweep_value,
        replications: outcomes.len(),
        realized_fdr,
        fdr_stderr,
        realized_power,
        power_stderr,
        theoretical_fdr,
        theoretical_power,
        mean_num_candidates,
    }
}

/// Runs replication `rep` of a configuration (its sweep, if any, is ignored).
pub fn run_replication(config: &ExperimentConfig, rep: usize) -> Result<ReplicationOutcome> {
    let plan = Plan::new(without_sweep(config))?;
    let z = smooth(&noise_for(config, rep)?, &plan.kernel)?;
    plan.replicate(&z)
}

/// All replication outcomes of a configuration, in replication order.
pub fn run_replications(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ReplicationOutcome>> {
    let plan = Plan::new(without_sweep(config))?;
    map_reps(config.settings.replications, exec, |r| {
        let z = smooth(&noise_for(config, r)?, &plan.kernel)?;
        plan.replicate(&z)
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, Execution::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    let outcomes = run_replications(config, exec)?;
    let plan = Plan::new(without_sweep(config))?;
    Ok(aggregate(&plan, &outcomes, None))
}

fn without_sweep(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    c.settings.sweep = None;
    c
}

/// One [`ExperimentResult`] per sweep grid point, each identical to running
/// [`run_experiment`] on [`ExperimentConfig::at`] that point. Noise is
/// generated once per replication and shared across grid points; smoothing
/// is shared too unless the bandwidth is the swept quantity.
pub fn sweep_curves(config: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    sweep_curves_with(config, Execution::default())
}

pub fn sweep_curves_with(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ExperimentResult>> {
    let Some(sweep) = &config.settings.sweep else {
        return Ok(vec![run_experiment_with(config, exec)?]);
    };
    config.validate()?;
    let plans = sweep
        .grid
        .iter()
        .map(|&x| Plan::new(config.at(sweep.axis, x)))
        .collect::<Result<Vec<_>>>()?;
    let share_smoothing = sweep.axis != SweepAxis::Gamma;

    let per_rep = map_reps(config.settings.replications, exec, |r| {
        let z = noise_for(config, r)?;
        let shared = if share_smoothing { Some(smooth(&z, &plans[0].kernel)?) } else { None };
        plans
            .iter()
            .map(|plan| match &shared {
                Some(zs) => plan.replicate(zs),
                None => plan.replicate(&smooth(&z, &plan.kernel)?),
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(plans
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let outcomes: Vec<ReplicationOutcome> = per_rep.iter().map(|row| row[i].clone()).collect();
            aggregate(plan, &outcomes, Some(sweep.grid[i]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(amplitude: f64, replications: usize) -> ExperimentConfig {
        let settings = ExperimentSettings {
            replications,
            master_seed: 7,
            ..Default::default()
        };
        ExperimentConfig::new(ScenarioSpec::nine_peak_layout(amplitude, 0.0, 3.0), settings)
    }

    #[test]
    fn seeds_differ_across_reps_and_masters() {
        assert_ne!(replication_seed(0, 0), replication_seed(0, 1));
        assert_ne!(replication_seed(0, 0), replication_seed(1, 0));
        assert_eq!(replication_seed(5, 9), replication_seed(5, 9));
    }

    #[test]
    fn single_replication_has_zero_stderr() {
        let r = run_experiment(&small_config(55.0, 1)).unwrap();
        assert_eq!(r.fdr_stderr, 0.0);
        assert_eq!(r.power_stderr, 0.0);
        assert!((0.0..=1.0).contains(&r.realized_fdr));
        assert!((0.0..=1.0).contains(&r.realized_power));
    }

    #[test]
    fn zero_amplitude_makes_every_discovery_false() {
        let cfg = small_config(0.0, 3);
        for rep in 0..3 {
            let o = run_replication(&cfg, rep).unwrap();
            assert_eq!(o.false_discoveries, o.discoveries);
            assert_eq!(o.hits, vec![false; 9]);
        }
        let r = run_experiment(&cfg).unwrap();
        assert!(r.theoretical_fdr.is_nan());
    }

    #[test]
    fn replication_is_deterministic() {
        let cfg = small_config(45.0, 1);
        assert_eq!(run_replication(&cfg, 3).unwrap(), run_replication(&cfg, 3).unwrap());
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let cfg = small_config(45.0, 4);
        let a = run_experiment_with(&cfg, Execution::Serial).unwrap();
        let b = run_experiment_with(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a.realized_fdr.to_bits(), b.realized_fdr.to_bits());
        assert_eq!(a.realized_power.to_bits(), b.realized_power.to_bits());
        assert_eq!(a.fdr_stderr.to_bits(), b.fdr_stderr.to_bits());
    }

    #[test]
    fn sweep_matches_pointwise_runs() {
        for (axis, grid) in [
            (SweepAxis::V, vec![f64::NEG_INFINITY, 1.0, 2.0]),
            (SweepAxis::Gamma, vec![2.0, 3.0]),
            (SweepAxis::Amplitude, vec![35.0, 55.0]),
        ] {
            let mut cfg = small_config(45.0, 3);
            cfg.settings.sweep = Some(SweepSpec { axis, grid: grid.clone() });
            let curve = sweep_curves(&cfg).unwrap();
            for (res, &x) in curve.iter().zip(&grid) {
                let mut point = run_experiment(&cfg.at(axis, x)).unwrap();
                point.sweep_value = Some(x);
                assert_eq!(res.realized_fdr.to_bits(), point.realized_fdr.to_bits(), "{axis:?} {x}");
                assert_eq!(res.realized_power.to_bits(), point.realized_power.to_bits(), "{axis:?} {x}");
                assert_eq!(res.mean_num_candidates, point.mean_num_candidates);
            }
        }
    }

    #[test]
    fn theory_overlay_near_reference_values() {
        let r = run_experiment(&small_config(55.0, 1)).unwrap();
        assert!(r.theoretical_fdr > 0.0 && r.theoretical_fdr < 0.05);
        assert!(r.theoretical_power > 0.9 && r.theoretical_power <= 1.0);
    }

    #[test]
    fn estimated_moments_run() {
        let mut cfg = small_config(55.0, 2);
        cfg.settings.moments = MomentSource::Estimate;
        let r = run_experiment(&cfg).unwrap();
        assert!((0.0..=1.0).contains(&r.realized_power));
    }

    #[test]
    fn rejects_bad_settings() {
        let mut cfg = small_config(55.0, 2);
        cfg.settings.mode = PValueMode::Overshoot;
        assert!(cfg.validate().is_err());
        cfg.settings.v = 1.0;
        assert!(cfg.validate().is_ok());
        cfg.settings.replications = 0;
        assert!(cfg.validate().is_err());
        cfg.settings.replications = 2;
        cfg.settings.sweep = Some(SweepSpec {
            axis: SweepAxis::V,
            grid: vec![1.0, 1.0],
        });
        assert!(cfg.validate().is_err());
        cfg.settings.v = f64::NEG_INFINITY;
        cfg.settings.sweep = Some(SweepSpec {
            axis: SweepAxis::V,
            grid: vec![1.0, 2.0],
        });
        assert!(cfg.validate().is_ok());
        cfg.settings.sweep.as_mut().unwrap().grid = vec![-1.0, 2.0];
        assert!(cfg.validate().is_err());
    }
}
