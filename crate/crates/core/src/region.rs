use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionFlavor {
    /// All line positions reproducing the observed mask.
    Homotopy,
    /// The single interval where every unit keeps its observed piece.
    OverConditioned,
    /// Built directly from user-supplied intervals.
    Explicit,
}

/// Ordered union of disjoint closed intervals on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRegion {
    intervals: Vec<(f64, f64)>,
    flavor: RegionFlavor,
}

impl TruncationRegion {
    /// Validates ordering and disjointness; infinite endpoints are allowed.
    pub fn new(intervals: Vec<(f64, f64)>, flavor: RegionFlavor) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Argument("truncation region needs at least one interval".into()));
        }
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                return Err(Error::Argument(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Argument("intervals must be sorted and disjoint".into()));
        }
        Ok(Self { intervals, flavor })
    }

    pub fn full_line() -> Self {
        Self {
            intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            flavor: RegionFlavor::Explicit,
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn flavor(&self) -> RegionFlavor {
        self.flavor
    }

    pub fn contains(&self, z: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= z && z <= hi)
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// True when every interval of `self` lies inside some interval of `other`,
    /// allowing `tol` slack at the endpoints.
    pub fn is_subset_of(&self, other: &TruncationRegion, tol: f64) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other
                .intervals
                .iter()
                .any(|&(olo, ohi)| olo - tol <= lo && hi <= ohi + tol)
        })
    }
}
