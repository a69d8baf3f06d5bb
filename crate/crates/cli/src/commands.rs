use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use stem_core::distributions::IsotropicHeightLaw;
use stem_core::experiment::{sweep_curves, MomentSource};
use stem_core::field_model::average_peak_template;
use stem_core::inference::{compute_pvalues, optimal_v, stem_test, theoretical_fdr, FdrVariant};
use stem_core::io::{load_csv_field, load_field, save_field, write_curve_table, write_detections, DetectionRecord};
use stem_core::{
    closed_form_moments, estimate_moments, find_local_maxima, fit_kernel_bandwidth, generate_noise, smooth,
    FieldMoments, GridField, KernelSpec, PValueLaw, StemError, TheoryParams,
};

use crate::config::load_config;
use crate::{CurvesArgs, DetectArgs, SimulateArgs, TheoryArgs};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    StemError::Invalid(msg.into()).into()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.scenario.noise.seed = seed;
    }
    let scenario = &config.scenario;
    let geometry = scenario.geometry()?;
    let signal = scenario.signal()?;
    let noise = generate_noise(&scenario.noise, &geometry)?;
    let observed = signal.add(&noise)?;
    let smoothed = smooth(&observed, &scenario.kernel)?;

    fs::create_dir_all(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
    for (name, field) in [
        ("signal", &signal),
        ("noise", &noise),
        ("observed", &observed),
        ("smoothed", &smoothed),
    ] {
        let path = args.output.join(format!("{name}.fld"));
        save_field(&path, field).with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "wrote {}x{} fields to {}",
        geometry.height,
        geometry.width,
        args.output.display()
    );
    Ok(())
}

fn load_input(path: &Path, spacing: f64) -> Result<GridField> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let field = if is_csv {
        load_csv_field(path, spacing)
    } else {
        load_field(path)
    };
    field.with_context(|| format!("cannot read {}", path.display()))
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(invalid(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if args.v.is_nan() || args.v == f64::INFINITY {
        return Err(invalid(format!("--v must be finite or -inf, got {}", args.v)));
    }
    // Checked before any file is read so that a bad mode/v pair is a
    // validation failure regardless of the input.
    PValueLaw::for_mode(args.mode, IsotropicHeightLaw::new(1.0, 1.0, 1.0)?, args.v)?;

    let field = load_input(&args.input, args.spacing)?;
    let labels = args
        .config
        .as_deref()
        .map(|p| load_config(p).and_then(|c| c.scenario.masks()))
        .transpose()?;
    if let Some(masks) = &labels {
        if (masks.geometry.height, masks.geometry.width) != (field.height(), field.width()) {
            return Err(invalid(format!(
                "scenario grid is {}x{}, field is {}x{}",
                masks.geometry.height,
                masks.geometry.width,
                field.height(),
                field.width()
            )));
        }
    }

    let gamma = match (args.gamma, args.fit_gamma) {
        (Some(g), _) => g,
        (None, true) => fit_gamma(&field, args)?,
        (None, false) if args.no_smooth && matches!(MomentSource::from(args.moments), MomentSource::Estimate) => {
            f64::NAN
        }
        (None, false) => bail!(invalid("one of --gamma or --fit-gamma is required")),
    };
    let smoothed = if args.no_smooth {
        field
    } else {
        smooth(&field, &KernelSpec::new(gamma))?
    };

    let (standardized, moments) = standardize(&smoothed, gamma, args)?;
    let law = IsotropicHeightLaw::new(1.0, moments.kappa, moments.maxima_density())?;
    let pvalue_law = PValueLaw::for_mode(args.mode, law, args.v)?.tabulated();

    let mut candidates = find_local_maxima(&standardized, args.v);
    compute_pvalues(&mut candidates, &pvalue_law)?;
    let outcome = stem_test(&mut candidates, &pvalue_law, args.alpha)?;
    if let Some(masks) = &labels {
        masks.label(&mut candidates);
    }

    let records: Vec<DetectionRecord> = candidates.iter().map(DetectionRecord::from).collect();
    let mut out = open_output(args.output.as_deref())?;
    write_detections(&mut out, &records)?;
    out.flush()?;

    let threshold = outcome.height_threshold.unwrap_or(f64::INFINITY);
    eprintln!(
        "gamma={gamma} sigma_gamma={} kappa={} candidates={} significant={} u_bh={threshold}",
        moments.sigma_gamma,
        moments.kappa,
        candidates.len(),
        outcome.k
    );
    Ok(())
}

/// Bandwidth of a Gaussian matched to the peak shape: the template is fitted
/// on a pilot-smoothed copy and the pilot width removed in quadrature.
fn fit_gamma(field: &GridField, args: &DetectArgs) -> Result<f64> {
    let pilot = smooth(field, &KernelSpec::new(args.fit_pilot))?;
    let template = average_peak_template(&pilot, args.fit_peaks, args.fit_radius)?;
    let width = fit_kernel_bandwidth(&template)?;
    let excess = width * width - args.fit_pilot * args.fit_pilot;
    if !(excess > 0.0) {
        return Err(invalid(format!(
            "fitted peak width {width} does not exceed the pilot bandwidth {}",
            args.fit_pilot
        )));
    }
    Ok(excess.sqrt())
}

/// Returns the field in units of the noise standard deviation and the
/// moments it was scaled by.
fn standardize(smoothed: &GridField, gamma: f64, args: &DetectArgs) -> Result<(GridField, FieldMoments)> {
    match MomentSource::from(args.moments) {
        MomentSource::ClosedForm => {
            if !gamma.is_finite() {
                return Err(invalid("closed-form moments need --gamma or --fit-gamma"));
            }
            let m = closed_form_moments(gamma, args.nu, args.sigma)?;
            let s = m.sigma_gamma;
            Ok((smoothed.map(|x| x / s), m))
        }
        MomentSource::Estimate => {
            let m = estimate_moments(smoothed, None)?;
            let (mean, s) = (smoothed.mean(), m.sigma_gamma);
            Ok((smoothed.map(|x| (x - mean) / s), m))
        }
    }
}

pub fn curves(args: &CurvesArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(r) = args.replications {
        config.settings.replications = r;
    }
    if let Some(seed) = args.seed {
        config.settings.master_seed = seed;
    }
    config.validate()?;
    let rows = sweep_curves(&config)?;
    let mut out = open_output(args.output.as_deref())?;
    write_curve_table(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

const THEORY_HEADER: &str = "v_sigma,v,u_star,u_double_star,beta,fdr_exact,fdr_overshoot,v_opt";

fn default_theory_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 / 10.0).collect()
}

pub fn theory(args: &TheoryArgs) -> Result<()> {
    let scenario = args.config.as_deref().map(load_config).transpose()?.map(|c| c.scenario);
    let moments = match (args.sigma_gamma, args.rho1, args.rho2) {
        (Some(s), Some(r1), Some(r2)) => FieldMoments::from_correlation(s, r1, r2)?,
        _ => match &scenario {
            Some(sc) => closed_form_moments(sc.kernel.gamma, sc.noise.nu, sc.noise.sigma)?,
            None => closed_form_moments(args.gamma, args.nu, args.sigma)?,
        },
    };
    let (a1, a2) = match &scenario {
        Some(sc) => {
            let masks = sc.masks()?;
            (args.a1.unwrap_or(masks.a1()), args.a2.unwrap_or(masks.a2_gamma()))
        }
        None => (
            args.a1.expect("clap requires --a1"),
            args.a2.expect("clap requires --a2"),
        ),
    };
    let law = IsotropicHeightLaw::from_moments(&moments)?;
    let params = TheoryParams::new(args.alpha, a1, a2, law, moments.lambda_det)?;
    let s = law.sigma_gamma();

    let grid = args.v_grid.clone().unwrap_or_else(default_theory_grid);
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
        return Err(invalid("--v-grid must be positive and strictly increasing"));
    }
    let heights: Vec<f64> = grid.iter().map(|x| x * s).collect();
    let v_opt = optimal_v(&params, &heights)?;

    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "{THEORY_HEADER}")?;
    let u_inf = params.u_star(f64::NEG_INFINITY)?;
    let fdr_inf = theoretical_fdr(&params, FdrVariant::BhExact(f64::NEG_INFINITY))?;
    writeln!(out, "-inf,-inf,{u_inf},nan,nan,{fdr_inf},nan,0")?;
    for (&x, &v) in grid.iter().zip(&heights) {
        let row = [
            params.u_star(v)?,
            params.u_double_star(v)?,
            params.beta(v)?,
            theoretical_fdr(&params, FdrVariant::BhExact(v))?,
            theoretical_fdr(&params, FdrVariant::BhOvershoot(v))?,
        ];
        let cols: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{x},{v},{},{}", cols.join(","), u8::from(v == v_opt))?;
    }
    out.flush()?;
    Ok(())
}
