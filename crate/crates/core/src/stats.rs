//! Small statistical helpers for validating p-value distributions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
///
/// The p-value uses the asymptotic Kolmogorov distribution with Stephens'
/// finite-sample correction `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let n = samples.len();
    if n == 0 {
        return KsResult {
            statistic: 0.0,
            p_value: 1.0,
            n,
        };
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / nf - x;
            let below = x - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    KsResult {
        statistic,
        p_value: kolmogorov_sf(lambda),
        n,
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sorted samples paired with uniform plotting positions `(i + 0.5) / n`.
pub fn uniform_qq(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, p)| ((i as f64 + 0.5) / n, p))
        .collect()
}

/// Normal-approximation 95% band `alpha +/- 1.96 sqrt(alpha (1 - alpha) / trials)`.
pub fn binomial_band(alpha: f64, trials: usize) -> (f64, f64) {
    let half = 1.96 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
    ((alpha - half).max(0.0), (alpha + half).min(1.0))
}

/// Standard error of a proportion.
pub fn binomial_se(rate: f64, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
