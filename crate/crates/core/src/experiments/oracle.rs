//! Brute-force cross-check of the region sweep: scan the line on a fine grid with
//! plain network evaluation, bisect every mask change, and compare.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{compute_solution_path, truncation_region, RegionPath};
use crate::hypothesis::{build_test_direction, line_parametrization, LineParametrization, NoiseModel};
use crate::image::SegmentationMask;
use crate::network::{forward, forward_values, init, NetworkSpec};

use super::config::{ExperimentConfig, NoiseFamily};
use super::data::{trial_rng, NoiseSampler};

fn mask_at(net: &NetworkSpec, line: &LineParametrization, z: f64) -> Result<SegmentationMask> {
    forward_values(net, &line.point(z))
}

/// Truncation region found by grid scan plus bisection of each boundary.
pub fn grid_scan_region(
    net: &NetworkSpec,
    line: &LineParametrization,
    mask_obs: &SegmentationMask,
    z_min: f64,
    z_max: f64,
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    let steps = ((z_max - z_min) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| (z_min + k as f64 * step).min(z_max)).collect();
    let inside = grid
        .par_iter()
        .map(|&z| Ok(&mask_at(net, line, z)? == mask_obs))
        .collect::<Result<Vec<bool>>>()?;

    let tol = 1e-13 * (z_max - z_min);
    let refine = |mut lo: f64, mut hi: f64, lo_inside: bool| -> Result<f64> {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if (&mask_at(net, line, mid)? == mask_obs) == lo_inside {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let mut intervals = Vec::new();
    let mut start = inside[0].then_some(z_min);
    for k in 1..grid.len() {
        match (inside[k - 1], inside[k]) {
            (false, true) => start = Some(refine(grid[k - 1], grid[k], false)?),
            (true, false) => {
                let end = refine(grid[k - 1], grid[k], true)?;
                intervals.push((start.take().expect("run has a start"), end));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, z_max));
    }
    Ok(intervals)
}

/// Largest endpoint difference between two interval lists; infinite when their
/// interval counts differ.
pub fn endpoint_deviation(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs()))
        .fold(0.0, f64::max)
}

/// Grid points whose plainly evaluated mask differs from the sweep's region mask.
pub fn mask_disagreements(
    net: &NetworkSpec,
    line: &LineParametrization,
    path: &RegionPath,
    step: f64,
) -> Result<usize> {
    let steps = ((path.z_max - path.z_min) / step).ceil() as usize;
    (0..=steps)
        .into_par_iter()
        .map(|k| {
            let z = (path.z_min + k as f64 * step).min(path.z_max);
            let region = path
                .region_at(z)
                .ok_or_else(|| Error::Consistency(format!("no region covers {z}")))?;
            Ok((mask_at(net, line, z)? != region.mask) as usize)
        })
        .sum::<Result<usize>>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub network: usize,
    pub image: usize,
    pub detected: bool,
    /// Endpoint deviation in units of `sigma_eta`.
    pub deviation: f64,
    pub mask_disagreements: usize,
    pub homotopy_intervals: usize,
    pub oracle_intervals: usize,
    pub region_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub max_deviation: f64,
    pub total_mask_disagreements: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares one image's sweep against the grid oracle.
pub fn check_case(
    net: &NetworkSpec,
    line: &LineParametrization,
    mask_obs: &SegmentationMask,
    path: &RegionPath,
    homotopy: &[(f64, f64)],
    step_sigmas: f64,
) -> Result<(f64, usize, usize)> {
    let step = step_sigmas * line.sigma_eta;
    let oracle = grid_scan_region(net, line, mask_obs, path.z_min, path.z_max, step)?;
    let deviation = endpoint_deviation(homotopy, &oracle) / line.sigma_eta;
    let disagreements = mask_disagreements(net, line, path, step)?;
    Ok((deviation, disagreements, oracle.len()))
}

/// Random seeded CNNs and Gaussian null images, each swept and grid-checked.
pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<OracleReport> {
    if cfg.n > 64 {
        return Err(Error::Argument(format!("oracle check is limited to n <= 64, got {}", cfg.n)));
    }
    let side = crate::image::square_side(cfg.n)
        .ok_or_else(|| Error::Argument(format!("n = {} is not a perfect square", cfg.n)))?;
    let sampler = NoiseSampler::new(NoiseFamily::Gaussian, side, side)?;
    let noise = NoiseModel::isotropic(1.0)?;
    let nets = (0..cfg.oracle_networks)
        .map(|k| init::cnn4(side, side, cfg.seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let cases = (0..cfg.oracle_networks * cfg.oracle_images)
        .into_par_iter()
        .map(|index| {
            let (k, i) = (index / cfg.oracle_images, index % cfg.oracle_images);
            let net = &nets[k];
            let mut rng = trial_rng(cfg.seed, index as u64);
            let image = sampler.sample(&mut rng);
            let mask = forward(net, &image)?;
            let Some(eta) = build_test_direction(&mask) else {
                return Ok(OracleCase {
                    network: k,
                    image: i,
                    detected: false,
                    deviation: 0.0,
                    mask_disagreements: 0,
                    homotopy_intervals: 0,
                    oracle_intervals: 0,
                    region_count: 0,
                });
            };
            let line = line_parametrization(&image, &eta, &noise)?;
            let (z_min, z_max) = line.search_range(cfg.range_sigmas);
            let path = compute_solution_path(net, &line, z_min, z_max)?;
            let z = truncation_region(&path, &mask, line.z_obs)?;
            let (deviation, disagreements, oracle_intervals) =
                check_case(net, &line, &mask, &path, z.intervals(), cfg.oracle_grid_step)?;
            Ok(OracleCase {
                network: k,
                image: i,
                detected: true,
                deviation,
                mask_disagreements: disagreements,
                homotopy_intervals: z.intervals().len(),
                oracle_intervals,
                region_count: path.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = cases.iter().map(|c| c.deviation).fold(0.0, f64::max);
    let total_mask_disagreements = cases.iter().map(|c| c.mask_disagreements).sum();
    Ok(OracleReport {
        passed: max_deviation <= cfg.oracle_endpoint_tol && total_mask_disagreements == 0,
        cases,
        max_deviation,
        total_mask_disagreements,
        tolerance: cfg.oracle_endpoint_tol,
    })
}
