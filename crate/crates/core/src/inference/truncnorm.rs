//! Two-sided tail probabilities of a centered Gaussian restricted to a union of
//! intervals. Masses are accumulated in log space from `erfc` differences so far
//! tails keep their relative precision.

use std::f64::consts::SQRT_2;

use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::region::TruncationRegion;

/// Standardized positions beyond this carry no representable Gaussian mass.
pub const TAIL_CUTOFF: f64 = 38.0;

/// `2 (1 - Phi(|z_obs| / sigma_eta))`.
pub fn naive_p(z_obs: f64, sigma_eta: f64) -> f64 {
    erfc(z_obs.abs() / (sigma_eta * SQRT_2)).clamp(0.0, 1.0)
}

/// `ln P(Z >= x)` for standard normal `Z`.
fn log_sf(x: f64) -> f64 {
    (0.5 * erfc(x / SQRT_2)).ln()
}

/// `ln(e^x - e^y)` for `x >= y`.
fn log_diff_exp(x: f64, y: f64) -> f64 {
    if y == f64::NEG_INFINITY {
        return x;
    }
    x + (-(y - x).exp_m1()).ln()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln P(lo <= Z <= hi)` for standard normal `Z`.
fn log_mass(lo: f64, hi: f64) -> f64 {
    let lo = lo.max(-TAIL_CUTOFF);
    let hi = hi.min(TAIL_CUTOFF);
    if !(lo < hi) {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        log_diff_exp(log_sf(lo), log_sf(hi))
    } else if hi <= 0.0 {
        log_diff_exp(log_sf(-hi), log_sf(-lo))
    } else {
        (0.5 * (erf(hi / SQRT_2) - erf(lo / SQRT_2))).ln()
    }
}

/// `P(|Z| >= |z_obs| | Z in region)` for `Z ~ N(0, sigma_eta^2)`.
pub fn truncated_two_sided_p(z_obs: f64, sigma_eta: f64, region: &TruncationRegion) -> Result<f64> {
    if !(sigma_eta.is_finite() && sigma_eta > 0.0) {
        return Err(Error::Argument(format!("sigma_eta must be positive, got {sigma_eta}")));
    }
    if !z_obs.is_finite() {
        return Err(Error::Argument(format!("z_obs {z_obs} is not finite")));
    }
    let t = z_obs.abs() / sigma_eta;
    let mut num = Vec::new();
    let mut den = Vec::with_capacity(region.intervals().len());
    for &(lo, hi) in region.intervals() {
        let (lo, hi) = (lo / sigma_eta, hi / sigma_eta);
        den.push(log_mass(lo, hi));
        // intersect with (-inf, -t] and [t, inf)
        if lo < -t {
            num.push(log_mass(lo, hi.min(-t)));
        }
        if hi > t {
            num.push(log_mass(lo.max(t), hi));
        }
    }
    let log_den = log_sum_exp(&den);
    if log_den == f64::NEG_INFINITY {
        return Err(Error::DegenerateRegion(format!(
            "no Gaussian mass on {:?} at scale {sigma_eta}",
            region.intervals()
        )));
    }
    let log_num = log_sum_exp(&num);
    Ok((log_num - log_den).exp().clamp(0.0, 1.0))
}

/// Survival function of `N(0, 1)`, exposed for reporting.
pub fn normal_sf(x: f64) -> f64 {
    log_sf(x).exp()
}
