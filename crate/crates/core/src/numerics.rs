//! Scalar numerical kernels: adaptive quadrature, golden-section search and
//! bisection.

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
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

/// Gauss weights for the embedded 7-point rule (abscissae XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 48;

fn gauss_kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
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

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Intervals are bisected until the Kronrod/Gauss difference on each piece
/// falls below its share of `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = gauss_kronrod15(&mut f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    if err <= tol {
        return whole;
    }
    refine(&mut f, a, b, tol, 0)
}

fn refine<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let (left, left_err) = gauss_kronrod15(f, a, mid);
    let (right, right_err) = gauss_kronrod15(f, mid, b);
    let combined = left + right;
    if depth >= MAX_DEPTH || left_err + right_err <= tol {
        return combined;
    }
    let half_tol = 0.5 * tol;
    let l = if left_err <= half_tol {
        left
    } else {
        refine(f, a, mid, half_tol, depth + 1)
    };
    let r = if right_err <= half_tol {
        right
    } else {
        refine(f, mid, b, half_tol, depth + 1)
    };
    l + r
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket width drops below `rel_width * max(|x|, 1)`, then
/// returns the best evaluated point. Errors from `f` abort the search.
pub fn golden_section_max<F, E>(mut f: F, lo: f64, hi: f64, rel_width: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    for _ in 0..200 {
        let scale = 0.5 * (a + b);
        if (b - a) <= rel_width * scale.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

/// Bisection for a root of `f` on `[lo, hi]`, given the function values at
/// both ends have opposite signs. Returns the bracket midpoint once the
/// bracket is narrower than `abs_tol`.
pub fn bisect<F, E>(mut f: F, mut lo: f64, mut hi: f64, f_lo: f64, abs_tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let lo_sign = f_lo > 0.0;
    while (hi - lo).abs() > abs_tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;
    use std::f64::consts::PI;

    #[test]
    fn quadrature_polynomial_and_trig() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-13, 1e-13);
        assert!((v - 0.0).abs() < 1e-12);
        let v = integrate(f64::sin, 0.0, PI, 1e-13, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_peaked_integrand() {
        // mean of (1 - x sin)^-3 over a period has a closed form
        let x: f64 = 0.5;
        let exact = (1.0 + 0.5 * x * x) / (1.0 - x * x).powf(2.5);
        let v = integrate(|t| (1.0 - x * t.sin()).powi(-3), 0.0, 2.0 * PI, 1e-13, 1e-13) / (2.0 * PI);
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) =
            golden_section_max(|x| Ok::<_, Infallible>(-(x - 1.3) * (x - 1.3) + 2.0), 0.0, 4.0, 1e-8).unwrap();
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let f = |x: f64| Ok::<_, Infallible>(2.0 - x * x);
        let r = bisect(f, 0.0, 2.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }
}
