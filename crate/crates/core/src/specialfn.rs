//! Standard normal and chi-square distribution functions, the normal quantile and
//! the one-sample Kolmogorov–Smirnov distance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::gamma;

use crate::error::{Error, Result};

/// Beyond this magnitude the normal cdf is clamped to exactly 0 or 1
/// (the true tail mass is below 1e-349 and underflows anyway).
pub const NORMAL_RANGE: f64 = 40.0;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(Error::domain(format!("probability must lie in [0, 1], got {p}")))
        }
    }

    /// Clamps into `[0, 1]`; used for bounds that may exceed 1 in form only.
    pub fn saturating(p: f64) -> Self {
        Probability(p.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

// Complementary error function after FreeBSD msun `s_erf.c` (Sun Microsystems, 1993):
// rational approximations on [0, 0.84375), [0.84375, 1.25), [1.25, 1/0.35), [1/0.35, 28).
const ERX: f64 = 8.45062911510467529297e-01;
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 5] = [
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 6] = [
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 8] = [
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 7] = [
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

#[inline]
fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs();
    if a < 0.84375 {
        let z = x * x;
        let y = horner(&PP, z) / (1.0 + z * horner(&QQ, z));
        return if x < 0.25 {
            1.0 - (x + x * y)
        } else {
            0.5 - (x * y + (x - 0.5))
        };
    }
    if a < 1.25 {
        let s = a - 1.0;
        let pq = horner(&PA, s) / (1.0 + s * horner(&QA, s));
        return if x < 0.0 { 1.0 + ERX + pq } else { 1.0 - ERX - pq };
    }
    if a >= 28.0 {
        return if x < 0.0 { 2.0 } else { 0.0 };
    }
    if x < -6.0 {
        return 2.0;
    }
    let s = 1.0 / (a * a);
    let (r, q) = if a < 1.0 / 0.35 {
        (horner(&RA, s), 1.0 + s * horner(&SA, s))
    } else {
        (horner(&RB, s), 1.0 + s * horner(&SB, s))
    };
    // split a so that z*z is exact
    let z = f64::from_bits(a.to_bits() & 0xffff_ffff_0000_0000);
    let t = (-z * z - 0.5625).exp() * ((z - a) * (z + a) + r / q).exp() / a;
    if x < 0.0 {
        2.0 - t
    } else {
        t
    }
}

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Φ(z)`, accurate to about 1e-16 absolute; clamped outside `[-40, 40]`.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    if z <= -NORMAL_RANGE {
        0.0
    } else if z >= NORMAL_RANGE {
        1.0
    } else {
        0.5 * erfc(-z * FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - Φ(z)` without cancellation.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    normal_cdf(-z)
}

pub fn std_normal_cdf(z: f64) -> Probability {
    Probability(normal_cdf(z))
}

// Acklam's rational approximation of the normal quantile (relative error 1.15e-9).
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Lower-half quantile, refined by one Halley step on the cdf.
fn lower_quantile(p: f64) -> f64 {
    let x = acklam(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse of `Φ` on the open interval `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    if p <= 0.5 {
        Ok(lower_quantile(p))
    } else {
        Ok(-lower_quantile(1.0 - p))
    }
}

/// Chi-square cdf with `dof` degrees of freedom: `P(dof/2, x/2)`.
pub fn chi2_cdf(x: f64, dof: u32) -> Result<Probability> {
    if dof == 0 {
        return Err(Error::invalid("chi-square needs at least one degree of freedom"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("chi-square cdf needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(Probability(0.0));
    }
    if x.is_infinite() {
        return Ok(Probability(1.0));
    }
    Ok(Probability::saturating(gamma::gamma_lr(
        0.5 * f64::from(dof),
        0.5 * x,
    )))
}

/// One-sample Kolmogorov–Smirnov statistic of ascending `sorted_values` against `cdf`.
pub fn ecdf_sup_distance<F>(sorted_values: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if sorted_values.is_empty() {
        return Err(Error::invalid("empirical cdf needs at least one value"));
    }
    if sorted_values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("empirical cdf values contain NaN"));
    }
    if sorted_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("empirical cdf values must be sorted ascending"));
    }
    let m = sorted_values.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in sorted_values.iter().enumerate() {
        let f = cdf(v);
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d = d.max(above.abs()).max(below.abs());
    }
    Ok(d)
}
