//! Naive, selective, over-conditioned and permutation p-values.

mod permutation;
mod truncnorm;

pub use permutation::{permutation_test, DEFAULT_PERMUTATIONS};
pub use truncnorm::{naive_p, normal_sf, truncated_two_sided_p, TAIL_CUTOFF};

use serde::Serialize;

use crate::error::Result;
use crate::homotopy::{
    compute_solution_path_with, oc_region, truncation_region, PathOptions, DEFAULT_RANGE_SIGMAS,
};
use crate::hypothesis::{build_test_direction, line_parametrization, NoiseModel};
use crate::image::ImageVector;
use crate::network::{forward, NetworkSpec};
use crate::region::TruncationRegion;

#[derive(Debug, Clone, Copy)]
pub enum SearchRange {
    /// `[-k sigma_eta, k sigma_eta]`.
    Sigmas(f64),
    Absolute { z_min: f64, z_max: f64 },
}

impl Default for SearchRange {
    fn default() -> Self {
        SearchRange::Sigmas(DEFAULT_RANGE_SIGMAS)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    pub range: SearchRange,
    /// Also compute the over-conditioned p-value.
    pub over_conditioned: bool,
    pub path: PathOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub z_obs: f64,
    pub sigma_eta: f64,
    pub p_naive: f64,
    pub p_selective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_oc: Option<f64>,
    pub truncation: TruncationRegion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oc_truncation: Option<TruncationRegion>,
    /// Linear regions crossed by the sweep.
    pub region_count: usize,
    pub object_pixels: usize,
}

/// Either nothing was detected (one region empty) or the full set of p-values.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    NoDetection,
    Tested(TestResult),
}

impl TestOutcome {
    pub fn detected(&self) -> bool {
        matches!(self, TestOutcome::Tested(_))
    }

    pub fn result(&self) -> Option<&TestResult> {
        match self {
            TestOutcome::Tested(r) => Some(r),
            TestOutcome::NoDetection => None,
        }
    }
}

/// Segments `x_obs`, then tests mean(object) = mean(background) conditional on
/// the observed segmentation.
pub fn selective_p_pipeline(
    net: &NetworkSpec,
    x_obs: &ImageVector,
    noise: &NoiseModel,
    options: PipelineOptions,
) -> Result<TestOutcome> {
    let mask = forward(net, x_obs)?;
    let Some(eta) = build_test_direction(&mask) else {
        return Ok(TestOutcome::NoDetection);
    };
    let line = line_parametrization(x_obs, &eta, noise)?;
    let (z_min, z_max) = match options.range {
        SearchRange::Sigmas(k) => line.search_range(k),
        SearchRange::Absolute { z_min, z_max } => (z_min, z_max),
    };
    let p_naive = naive_p(line.z_obs, line.sigma_eta);
    let path = compute_solution_path_with(net, &line, z_min, z_max, options.path)?;
    let truncation = truncation_region(&path, &mask, line.z_obs)?;
    let p_selective = truncated_two_sided_p(line.z_obs, line.sigma_eta, &truncation)?;
    let (p_oc, oc_truncation) = if options.over_conditioned {
        let oc = oc_region(net, &line, line.z_obs, z_min, z_max)?;
        let p = truncated_two_sided_p(line.z_obs, line.sigma_eta, &oc)?;
        (Some(p), Some(oc))
    } else {
        (None, None)
    };
    Ok(TestOutcome::Tested(TestResult {
        z_obs: line.z_obs,
        sigma_eta: line.sigma_eta,
        p_naive,
        p_selective,
        p_oc,
        truncation,
        oc_truncation,
        region_count: path.len(),
        object_pixels: mask.object_count(),
    }))
}
