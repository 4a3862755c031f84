use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::binomial_se;

/// Everything recorded for one simulated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub detected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_obs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_naive: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_selective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_oc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    /// Total length of the truncation region.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_intervals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oc_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_count: Option<usize>,
    /// Excluded from determinism comparisons.
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn undetected(trial: usize, wall_ms: f64) -> Self {
        Self {
            trial,
            detected: false,
            z_obs: None,
            sigma_eta: None,
            p_naive: None,
            p_selective: None,
            p_oc: None,
            p_permutation: None,
            truncation_length: None,
            truncation_intervals: None,
            oc_length: None,
            region_count: None,
            wall_ms,
        }
    }
}

/// Rejection rate among detected trials: `# detected & rejected / # detected`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rejections: usize,
    pub detections: usize,
    pub rate: f64,
    pub standard_error: f64,
}

impl Rate {
    pub fn from_p_values(p: impl Iterator<Item = f64>, detections: usize, alpha: f64) -> Self {
        let rejections = p.filter(|&p| p <= alpha).count();
        let rate = if detections == 0 {
            0.0
        } else {
            rejections as f64 / detections as f64
        };
        Self {
            rejections,
            detections,
            rate,
            standard_error: binomial_se(rate, detections),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub alpha: f64,
    pub trials: usize,
    pub detections: usize,
    pub selective: Rate,
    pub naive: Rate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub over_conditioned: Option<Rate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Rate>,
    pub mean_truncation_length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_oc_length: Option<f64>,
    pub mean_truncation_intervals: f64,
    pub mean_region_count: f64,
    pub max_region_count: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl Summary {
    pub fn from_records(records: &[TrialRecord], alpha: f64) -> Self {
        let detected: Vec<&TrialRecord> = records.iter().filter(|r| r.detected).collect();
        let d = detected.len();
        let rate = |f: fn(&TrialRecord) -> Option<f64>| -> Option<Rate> {
            let values: Vec<f64> = detected.iter().filter_map(|r| f(r)).collect();
            (!values.is_empty()).then(|| Rate::from_p_values(values.into_iter(), d, alpha))
        };
        let empty = Rate::from_p_values(std::iter::empty(), d, alpha);
        Self {
            alpha,
            trials: records.len(),
            detections: d,
            selective: rate(|r| r.p_selective).unwrap_or(empty),
            naive: rate(|r| r.p_naive).unwrap_or(empty),
            over_conditioned: rate(|r| r.p_oc),
            permutation: rate(|r| r.p_permutation),
            mean_truncation_length: mean(detected.iter().filter_map(|r| r.truncation_length)).unwrap_or(0.0),
            mean_oc_length: mean(detected.iter().filter_map(|r| r.oc_length)),
            mean_truncation_intervals: mean(
                detected.iter().filter_map(|r| r.truncation_intervals.map(|c| c as f64)),
            )
            .unwrap_or(0.0),
            mean_region_count: mean(detected.iter().filter_map(|r| r.region_count.map(|c| c as f64)))
                .unwrap_or(0.0),
            max_region_count: detected.iter().filter_map(|r| r.region_count).max().unwrap_or(0),
        }
    }
}

/// One setting of an experiment (a single `n`, effect size, noise family, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub params: BTreeMap<String, serde_json::Value>,
    /// One summary per significance level studied.
    pub summaries: Vec<Summary>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
    /// Sorted selective p-values against uniform quantiles, when collected.
    #[serde(skip)]
    pub qq: Vec<(f64, f64)>,
}

impl GroupReport {
    pub fn summary(&self) -> &Summary {
        &self.summaries[0]
    }

    pub fn summary_at(&self, alpha: f64) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.alpha == alpha)
    }

    pub fn selective_p_values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.p_selective).collect()
    }

    pub fn naive_p_values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.p_naive).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub groups: Vec<GroupReport>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn group(&self, label: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Trial records as JSON lines, tagged with their group, wall times zeroed.
    pub fn deterministic_payload(&self) -> String {
        let mut out = self.summary_json();
        for g in &self.groups {
            for r in &g.records {
                let mut r = r.clone();
                r.wall_ms = 0.0;
                out.push_str(&serde_json::to_string(&r).expect("records serialize"));
                out.push('\n');
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `summary.json`, `trials.jsonl`, and `qq_<group>.csv` for groups with QQ data.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let summary = dir.join("summary.json");
        fs::write(&summary, self.summary_json()).map_err(|e| Error::io(&summary, e))?;

        let trials = dir.join("trials.jsonl");
        let file = File::create(&trials).map_err(|e| Error::io(&trials, e))?;
        let mut w = BufWriter::new(file);
        for g in &self.groups {
            for r in &g.records {
                let mut value = serde_json::to_value(r).expect("records serialize");
                value["group"] = serde_json::Value::String(g.label.clone());
                writeln!(w, "{value}").map_err(|e| Error::io(&trials, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&trials, e))?;

        for g in self.groups.iter().filter(|g| !g.qq.is_empty()) {
            let name: String = g
                .label
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
                .collect();
            let path = dir.join(format!("qq_{name}.csv"));
            let mut text = String::from("uniform_quantile,p_value\n");
            for (u, p) in &g.qq {
                text.push_str(&format!("{u},{p}\n"));
            }
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
