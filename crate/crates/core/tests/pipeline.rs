use stem_core::distributions::IsotropicHeightLaw;
use stem_core::experiment::{run_replication, run_replications, Execution, ExperimentConfig, ExperimentSettings};
use stem_core::inference::{compute_pvalues, stem_test, PValueLaw, TheoryParams};
use stem_core::{
    closed_form_moments, find_local_maxima, generate_noise, smooth, GridGeometry, KernelSpec, NoiseSpec, ScenarioSpec,
};

fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let c = cdf(x);
        d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs())
    })
}

#[test]
fn conditional_heights_above_one_sigma_follow_the_conditional_law() {
    let grid = GridGeometry::square(512).unwrap();
    let kernel = KernelSpec::new(3.0);
    let law = IsotropicHeightLaw::from_moments(&closed_form_moments(3.0, 0.0, 1.0).unwrap()).unwrap();
    let v = law.sigma_gamma();
    let mut heights = Vec::new();
    for seed in 0..20 {
        let z = smooth(&generate_noise(&NoiseSpec::new(1.0, 0.0, 300 + seed), &grid).unwrap(), &kernel).unwrap();
        heights.extend(find_local_maxima(&z, v).iter().map(|p| p.height));
    }
    heights.sort_by(f64::total_cmp);
    assert!(heights.len() > 5_000);
    let ks = ks_distance(&heights, |h| 1.0 - law.tail_cond(h, v).unwrap());
    assert!(ks <= 0.02, "KS {ks}");
}

/// The background between the truncated peaks is still pure (tiny) noise, so
/// null maxima exist and BH may reject a few of them; only the peaks are
/// deterministic.
#[test]
fn noiseless_limit_detects_every_peak() {
    let mut scenario = ScenarioSpec::nine_peak_layout(55.0, 0.0, 3.0);
    scenario.noise.sigma = 1e-6;
    let cfg = ExperimentConfig::new(
        scenario,
        ExperimentSettings {
            replications: 1,
            ..Default::default()
        },
    );
    let mut fdp = Vec::new();
    for rep in 0..40 {
        let o = run_replication(&cfg, rep).unwrap();
        assert_eq!(o.hits, vec![true; 9], "rep {rep}");
        fdp.push(o.fdp());
    }
    let mean = fdp.iter().sum::<f64>() / fdp.len() as f64;
    let zero = fdp.iter().filter(|&&x| x == 0.0).count();
    assert!(mean <= 0.05, "mean FDP {mean}");
    assert!(zero >= 20, "V = 0 in only {zero} of 40 replications");
}

#[test]
fn bh_threshold_settles_near_its_deterministic_limit() {
    let scenario = ScenarioSpec::nine_peak_layout(55.0, 0.0, 3.0);
    let cfg = ExperimentConfig::new(
        scenario.clone(),
        ExperimentSettings {
            replications: 200,
            master_seed: 11,
            ..Default::default()
        },
    );
    let outcomes = run_replications(&cfg, Execution::Serial).unwrap();
    let m = closed_form_moments(3.0, 0.0, 1.0).unwrap();
    let law = IsotropicHeightLaw::from_moments(&m).unwrap();
    let masks = scenario.masks().unwrap();
    let params = TheoryParams::new(0.05, masks.a1(), masks.a2_gamma(), law, m.lambda_det).unwrap();
    let u_star = params.u_star(f64::NEG_INFINITY).unwrap();
    let mut gaps: Vec<f64> = outcomes
        .iter()
        .map(|o| o.height_threshold.map_or(f64::INFINITY, |u| (u - u_star).abs()))
        .collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    assert!(median <= 0.15 * law.sigma_gamma(), "median gap {median}");
}

#[test]
fn pvalue_and_height_rejections_coincide() {
    let scenario = ScenarioSpec::nine_peak_layout(45.0, 0.0, 3.0);
    let geometry = scenario.geometry().unwrap();
    let law = IsotropicHeightLaw::from_moments(&closed_form_moments(3.0, 0.0, 1.0).unwrap()).unwrap();
    let signal = scenario.signal().unwrap();
    for seed in 0..10 {
        let z = generate_noise(&scenario.noise.with_seed(seed), &geometry).unwrap();
        let y = smooth(&signal.add(&z).unwrap(), &scenario.kernel).unwrap();
        for v in [f64::NEG_INFINITY, 0.5 * law.sigma_gamma(), 1.5 * law.sigma_gamma()] {
            for pl in [PValueLaw::exact(law, v).unwrap(), PValueLaw::exact(law, v).unwrap().tabulated()] {
                let mut cands = find_local_maxima(&y, v);
                compute_pvalues(&mut cands, &pl).unwrap();
                let out = stem_test(&mut cands, &pl, 0.05).unwrap();
                let Some(u) = out.height_threshold.filter(|_| out.k > 0) else { continue };
                for c in &cands {
                    assert_eq!(c.significant, c.height > u, "seed {seed} v {v}: height {} vs {u}", c.height);
                }
            }
        }
    }
}

#[test]
fn estimated_moments_track_the_closed_form_threshold() {
    let scenario = ScenarioSpec::nine_peak_layout(55.0, 1.0, 7f64.sqrt());
    let closed = ExperimentConfig::new(
        scenario.clone(),
        ExperimentSettings {
            replications: 20,
            ..Default::default()
        },
    );
    let mut estimated = closed.clone();
    estimated.settings.moments = stem_core::experiment::MomentSource::Estimate;
    let a = run_replications(&closed, Execution::Serial).unwrap();
    let b = run_replications(&estimated, Execution::Serial).unwrap();
    let mut mean_ratio = 0.0;
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.num_candidates, y.num_candidates);
        let r = y.sigma_gamma / x.sigma_gamma;
        assert!((r - 1.0).abs() < 0.1, "{r}");
        mean_ratio += r / a.len() as f64;
    }
    assert!((mean_ratio - 1.0).abs() < 0.04, "{mean_ratio}");
}
