//! Linear-region enumeration along the data line.
//!
//! Starting at `z_min`, the network is evaluated just inside the current region;
//! the collected constraints tell how far the current piece signature survives,
//! and the sweep jumps to that breakpoint. Repeating until `z_max` yields every
//! region the line crosses together with its segmentation mask.

use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::LineParametrization;
use crate::image::SegmentationMask;
use crate::network::{forward_line, AffineUnitConstraint, NetworkSpec};
use crate::region::{RegionFlavor, TruncationRegion};

/// Slopes with magnitude at or below this never flip.
pub const SLOPE_TOL: f64 = 1e-12;

/// Default bound on the number of regions in one sweep.
pub const DEFAULT_REGION_CAP: usize = 1_000_000;

/// Default half-width of the search range, in units of `sigma_eta`.
pub const DEFAULT_RANGE_SIGMAS: f64 = 20.0;

/// Smallest root above `z_t` among constraints that tighten as `z` grows,
/// or `z_max` when none lies below it.
pub fn next_breakpoint(constraints: &[AffineUnitConstraint], z_t: f64, z_max: f64) -> Result<f64> {
    let tol = 1e-7 * z_t.abs().max(z_max.abs()).max(1.0);
    let mut next = z_max;
    for c in constraints {
        if c.slope <= SLOPE_TOL {
            continue;
        }
        let root = -c.intercept / c.slope;
        if root > z_t {
            next = next.min(root);
        } else if z_t - root > tol {
            return Err(Error::Consistency(format!(
                "constraint at layer {} unit {} flips at {root}, behind current position {z_t}",
                c.layer, c.unit
            )));
        }
    }
    if !next.is_finite() {
        return Err(Error::Numeric(format!("non-finite breakpoint after {z_t}")));
    }
    Ok(next)
}

/// One linear region of the network restricted to the line.
#[derive(Debug, Clone)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub signature_hash: u64,
    pub mask: SegmentationMask,
    /// Units whose selected piece differs from the previous region.
    pub piece_changes: usize,
}

#[derive(Debug, Clone)]
pub struct RegionPath {
    pub z_min: f64,
    pub z_max: f64,
    pub regions: Vec<Region>,
    /// Regions whose midpoint signature disagreed with the one found at their start.
    pub midpoint_mismatches: usize,
}

impl RegionPath {
    /// `z_min`, every interior breakpoint, then `z_max`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.regions.iter().map(|r| r.lo).collect();
        out.push(self.z_max);
        out
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region containing `z`; a shared boundary belongs to the region on its right.
    pub fn region_at(&self, z: f64) -> Option<&Region> {
        if z < self.z_min || z > self.z_max {
            return None;
        }
        let idx = self.regions.partition_point(|r| r.lo <= z);
        self.regions.get(idx.saturating_sub(1))
    }

    /// One JSON record per region: `lo`, `hi`, run-length-encoded mask, piece changes.
    pub fn write_dump(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.regions {
            let record = RegionRecord {
                lo: r.lo,
                hi: r.hi,
                mask_rle: r.mask.run_lengths(),
                piece_changes: r.piece_changes,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub lo: f64,
    pub hi: f64,
    pub mask_rle: Vec<usize>,
    pub piece_changes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub region_cap: usize,
    /// Re-evaluate each region at its midpoint and count signature mismatches.
    pub validate_midpoints: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            region_cap: DEFAULT_REGION_CAP,
            validate_midpoints: true,
        }
    }
}

pub fn compute_solution_path(
    net: &NetworkSpec,
    line: &LineParametrization,
    z_min: f64,
    z_max: f64,
) -> Result<RegionPath> {
    compute_solution_path_with(net, line, z_min, z_max, PathOptions::default())
}

pub fn compute_solution_path_with(
    net: &NetworkSpec,
    line: &LineParametrization,
    z_min: f64,
    z_max: f64,
    options: PathOptions,
) -> Result<RegionPath> {
    if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
        return Err(Error::Argument(format!("invalid search range [{z_min}, {z_max}]")));
    }
    let delta = 1e-9 * (z_max - z_min);
    let mut regions: Vec<Region> = Vec::new();
    let mut prev_signature: Option<Vec<u32>> = None;
    let mut mismatches = 0;
    let mut z_t = z_min;

    while z_t < z_max {
        if regions.len() >= options.region_cap {
            return Err(Error::PathExplosion {
                cap: options.region_cap,
                z_min,
                z_max,
            });
        }
        let probe = if z_t + delta < z_max {
            z_t + delta
        } else {
            0.5 * (z_t + z_max)
        };
        let eval = forward_line(net, &line.a, &line.b, probe)?;
        let z_next = next_breakpoint(&eval.constraints, z_t, z_max)?;

        if options.validate_midpoints {
            let mid = 0.5 * (z_t + z_next);
            if mid > probe {
                let check = forward_line(net, &line.a, &line.b, mid)?;
                if check.signature_hash != eval.signature_hash {
                    mismatches += 1;
                    debug!("signature changes inside [{z_t}, {z_next}] at midpoint {mid}");
                }
            }
        }

        let piece_changes = match &prev_signature {
            Some(prev) => prev.iter().zip(&eval.signature).filter(|(a, b)| a != b).count(),
            None => 0,
        };
        match regions.last_mut() {
            // A breakpoint that changed nothing (rounding at a tangency) extends the region.
            Some(last) if prev_signature.is_some() && piece_changes == 0 => last.hi = z_next,
            _ => regions.push(Region {
                lo: z_t,
                hi: z_next,
                signature_hash: eval.signature_hash,
                mask: eval.mask,
                piece_changes,
            }),
        }
        prev_signature = Some(eval.signature);
        z_t = z_next;
    }
    if mismatches > 0 {
        warn!("{mismatches} regions failed the midpoint signature check");
    }
    Ok(RegionPath {
        z_min,
        z_max,
        regions,
        midpoint_mismatches: mismatches,
    })
}

/// Union of the regions whose mask equals `mask_obs`, adjacent pieces merged.
pub fn truncation_region(
    path: &RegionPath,
    mask_obs: &SegmentationMask,
    z_obs: f64,
) -> Result<TruncationRegion> {
    if z_obs < path.z_min || z_obs > path.z_max {
        return Err(Error::Argument(format!(
            "z_obs {z_obs} outside search range [{}, {}]",
            path.z_min, path.z_max
        )));
    }
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for r in path.regions.iter().filter(|r| &r.mask == mask_obs) {
        match intervals.last_mut() {
            Some(last) if last.1 == r.lo => last.1 = r.hi,
            _ => intervals.push((r.lo, r.hi)),
        }
    }
    if !intervals.iter().any(|&(lo, hi)| lo <= z_obs && z_obs <= hi) {
        return Err(Error::Consistency(format!(
            "observed position {z_obs} is not inside any region reproducing the observed mask"
        )));
    }
    TruncationRegion::new(intervals, RegionFlavor::Homotopy)
}

/// Interval around `z_obs` on which every constraint keeps its sign.
pub fn oc_interval(
    constraints: &[AffineUnitConstraint],
    z_obs: f64,
    z_min: f64,
    z_max: f64,
) -> Result<TruncationRegion> {
    let mut lo = z_min;
    let mut hi = z_max;
    for c in constraints {
        if c.slope > SLOPE_TOL {
            hi = hi.min(-c.intercept / c.slope);
        } else if c.slope < -SLOPE_TOL {
            lo = lo.max(-c.intercept / c.slope);
        }
    }
    let tol = 1e-9 * (z_max - z_min);
    if !(lo < hi) {
        if lo - hi > tol {
            return Err(Error::Consistency(format!(
                "over-conditioned interval is empty: [{lo}, {hi}]"
            )));
        }
        // a unit sits exactly on a knot at z_obs: a degenerate sliver
        let mid = 0.5 * (lo + hi);
        lo = mid - 0.5 * tol;
        hi = mid + 0.5 * tol;
    }
    if z_obs < lo - tol || z_obs > hi + tol {
        return Err(Error::Consistency(format!(
            "z_obs {z_obs} outside its own over-conditioned interval [{lo}, {hi}]"
        )));
    }
    TruncationRegion::new(vec![(lo, hi)], RegionFlavor::OverConditioned)
}

/// Over-conditioned truncation region: fix every unit's observed piece.
pub fn oc_region(
    net: &NetworkSpec,
    line: &LineParametrization,
    z_obs: f64,
    z_min: f64,
    z_max: f64,
) -> Result<TruncationRegion> {
    if z_obs < z_min || z_obs > z_max {
        return Err(Error::Argument(format!(
            "z_obs {z_obs} outside search range [{z_min}, {z_max}]"
        )));
    }
    let eval = forward_line(net, &line.a, &line.b, z_obs)?;
    oc_interval(&eval.constraints, z_obs, z_min, z_max)
}
