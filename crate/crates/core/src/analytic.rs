//! Normal distribution functions and the closed-form accuracy of linear
//! classifiers on symmetric Gaussian classes.
//!
//! `erf`/`erfc` follow W. J. Cody's rational Chebyshev approximations
//! (Math. Comp. 23, 1969; the CALERF routine), whose maximal relative error is
//! below 1e-16 on each of the three intervals `|x| ≤ 0.46875`,
//! `0.46875 < |x| ≤ 4` and `|x| > 4`. The normal quantile is Wichura's
//! algorithm AS 241 (PPND16), accurate to about 1e-16 relative, followed by one
//! Newton correction against the CDF above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quad_form, Matrix, Vector};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_099e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_7e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_4,
    1.872_952_849_923_467_3,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

/// `exp(-y²)` evaluated as `exp(-t²)·exp(-(y-t)(y+t))` with `t` rounded to
/// 1/16 so that the square does not lose bits.
fn exp_neg_square(y: f64) -> f64 {
    let t = (y * 16.0).trunc() / 16.0;
    let del = (y - t) * (y + t);
    (-t * t).exp() * (-del).exp()
}

/// `erfc(y)` for `y > 0.46875`.
fn erfc_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        let r = (num + ERF_C[7]) / (den + ERF_D[7]);
        r * exp_neg_square(y)
    } else {
        if y >= 26.55 {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        let r = (FRAC_1_SQRT_PI - r) / y;
        r * exp_neg_square(y)
    }
}

/// `erf(x)` on `|x| ≤ 0.46875`.
fn erf_core(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.468_75 {
        erf_core(x)
    } else {
        let r = 1.0 - erfc_tail(y);
        if x < 0.0 {
            -r
        } else {
            r
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.468_75 {
        return 1.0 - erf_core(x);
    }
    let r = erfc_tail(y);
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF `Φ(z)`.
pub fn probit_inv(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Inverse standard normal CDF `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn probit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probit needs p in (0,1), got {p}"
        )));
    }
    let z = ppnd16(p);
    // one Newton step on Φ(z) = p; works on the smaller tail to keep
    // relative precision
    let dens = normal_pdf(z);
    if dens > 0.0 {
        let resid = if z > 0.0 {
            (1.0 - p) - probit_inv(-z)
        } else {
            probit_inv(z) - p
        };
        return Ok(z - resid / dens);
    }
    Ok(z)
}

/// Accuracy together with the signal-to-noise ratio it was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrSummary {
    pub snr: f64,
    pub accuracy: f64,
}

impl SnrSummary {
    pub fn from_snr(snr: f64) -> Self {
        Self {
            snr,
            accuracy: probit_inv(snr),
        }
    }
}

/// `wᵀμ / sqrt(wᵀΣw)`.
pub fn snr(w: &Vector, mu: &Vector, sigma: &Matrix) -> Result<f64> {
    if w.len() != mu.len() || sigma.shape() != (w.len(), w.len()) {
        return Err(Error::DimensionMismatch(
            "w, mu and sigma must agree in dimension".into(),
        ));
    }
    let var = quad_form(w, sigma);
    if !(var > 0.0) {
        return Err(Error::DegenerateProjection(var));
    }
    Ok(w.dot(mu) / var.sqrt())
}

/// Accuracy of `sign(wᵀx)` when `X | Y ~ N(Y·μ, Σ)` with `Y = ±1`:
/// `Φ(wᵀμ / sqrt(wᵀΣw))`, whatever the class prior.
pub fn gaussian_accuracy(w: &Vector, mu: &Vector, sigma: &Matrix) -> Result<f64> {
    Ok(probit_inv(snr(w, mu, sigma)?))
}

/// Accuracy of the threshold-at-zero rule when class 0 scores are centred at
/// zero and class 1 scores are shifted by `r` noise units:
/// `p·Φ(r) + (1 − p)/2` with `p = Pr(Y = 1)`.
pub fn threshold_accuracy(snr: f64, prior: f64) -> Result<f64> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidArgument(format!("prior {prior} outside (0,1)")));
    }
    Ok(prior * probit_inv(snr) + (1.0 - prior) * 0.5)
}
