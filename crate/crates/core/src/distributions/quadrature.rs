//! Adaptive 15-point Gauss–Kronrod quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 20;
// Relative error estimates below this are round-off; splitting further cannot help.
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// Kronrod estimate and |Kronrod − Gauss| on `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` by recursive bisection until each piece
/// satisfies `err ≤ max(abs_tol, rel_tol·|piece|)`, with the absolute budget
/// halved at each split.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (est, err) = gk15(&f, a, b);
    refine(&f, a, b, est, err, abs_tol, rel_tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    est: f64,
    err: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
) -> f64 {
    if err <= abs_tol.max(rel_tol.max(ROUNDOFF) * est.abs()) || depth >= MAX_DEPTH {
        return est;
    }
    let mid = 0.5 * (a + b);
    let (l, le) = gk15(f, a, mid);
    let (r, re) = gk15(f, mid, b);
    refine(f, a, mid, l, le, 0.5 * abs_tol, rel_tol, depth + 1)
        + refine(f, mid, b, r, re, 0.5 * abs_tol, rel_tol, depth + 1)
}
