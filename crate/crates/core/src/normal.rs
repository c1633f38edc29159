//! Standard normal distribution: CDF, density and quantile.
//!
//! The quantile starts from Acklam's rational approximation (relative error
//! about 1.15e-9) and takes one Halley step against the erfc-based CDF, which
//! brings it to working precision. Only the lower tail is ever evaluated;
//! upper-tail arguments are reflected, so `1 - p` never loses digits.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::SimError;

const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
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

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Phi(x) = erfc(-x / sqrt 2) / 2`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Quantile of the standard normal, `Phi^{-1}(p)` for `p` in (0, 1).
pub fn inverse_normal_cdf(p: f64) -> Result<f64, SimError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SimError::Domain(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    Ok(quantile_unchecked(p))
}

/// Upper `eps`-quantile `z_eps`, the point with `P(Z > z_eps) = eps`.
pub fn upper_quantile(eps: f64) -> Result<f64, SimError> {
    inverse_normal_cdf(eps).map(|q| -q)
}

/// Quantile without the range check; `p` must lie in (0, 1).
pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        -lower_quantile(1.0 - p)
    } else {
        lower_quantile(p)
    }
}

fn lower_quantile(p: f64) -> f64 {
    let x = acklam(p);
    if x == 0.0 {
        return x;
    }
    // Halley step on Phi(x) - p.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

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
