use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::Result;
use crate::hypothesis::{estimate_variance, NoiseModel};
use crate::inference::{
    permutation_test, selective_p_pipeline, PipelineOptions, SearchRange, TestOutcome,
};
use crate::network::NetworkSpec;
use crate::stats::{ks_uniform, log_log_slope, uniform_qq};

use super::config::{DenseActivation, ExperimentConfig, NetworkSource, NoiseFamily, PivotActivation, SigmaMode};
use super::data::{generate_signal_image, trial_rng, NoiseSampler};
use super::report::{ExperimentReport, GroupReport, Summary, TrialRecord};

/// Everything fixed across the trials of one group.
pub struct TrialPlan<'a> {
    pub net: &'a NetworkSpec,
    pub family: NoiseFamily,
    pub delta_mu: f64,
    pub sigma_mode: SigmaMode,
    pub over_conditioned: bool,
    pub permutations: usize,
    pub range_sigmas: f64,
    pub seed: u64,
    pub trials: usize,
}

impl TrialPlan<'_> {
    /// Runs every trial (in parallel) and returns records ordered by trial index.
    pub fn run(&self) -> Result<Vec<TrialRecord>> {
        let shape = self.net.input_shape();
        let sampler = NoiseSampler::new(self.family, shape.height, shape.width)?;
        let known = match sampler.covariance() {
            Some(cov) => NoiseModel::full(cov)?,
            None => NoiseModel::isotropic(1.0)?,
        };
        (0..self.trials)
            .into_par_iter()
            .map(|trial| self.run_trial(trial, &sampler, &known))
            .collect()
    }

    fn run_trial(&self, trial: usize, sampler: &NoiseSampler, known: &NoiseModel) -> Result<TrialRecord> {
        let start = Instant::now();
        let mut rng = trial_rng(self.seed, trial as u64);
        let shape = self.net.input_shape();
        let image = if self.delta_mu > 0.0 {
            generate_signal_image(shape.height, shape.width, self.delta_mu, &mut rng)?.0
        } else {
            sampler.sample(&mut rng)
        };
        let noise = match self.sigma_mode {
            SigmaMode::Known => known.clone(),
            SigmaMode::Estimated => estimate_variance(&sampler.sample_values(&mut rng))?,
        };
        let perm_seed: u64 = rng.random();
        let options = PipelineOptions {
            range: SearchRange::Sigmas(self.range_sigmas),
            over_conditioned: self.over_conditioned,
            ..Default::default()
        };
        let outcome = selective_p_pipeline(self.net, &image, &noise, options)?;
        let record = match outcome {
            TestOutcome::NoDetection => TrialRecord::undetected(trial, 0.0),
            TestOutcome::Tested(r) => {
                let p_permutation = if self.permutations > 0 {
                    permutation_test(self.net, &image, self.permutations, perm_seed)?
                } else {
                    None
                };
                TrialRecord {
                    trial,
                    detected: true,
                    z_obs: Some(r.z_obs),
                    sigma_eta: Some(r.sigma_eta),
                    p_naive: Some(r.p_naive),
                    p_selective: Some(r.p_selective),
                    p_oc: r.p_oc,
                    p_permutation,
                    truncation_length: Some(r.truncation.total_length()),
                    truncation_intervals: Some(r.truncation.intervals().len()),
                    oc_length: r.oc_truncation.as_ref().map(|z| z.total_length()),
                    region_count: Some(r.region_count),
                    wall_ms: 0.0,
                }
            }
        };
        Ok(TrialRecord {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..record
        })
    }
}

fn group(
    label: String,
    params: BTreeMap<String, serde_json::Value>,
    records: Vec<TrialRecord>,
    alphas: &[f64],
) -> GroupReport {
    GroupReport {
        label,
        params,
        summaries: alphas.iter().map(|&a| Summary::from_records(&records, a)).collect(),
        metrics: BTreeMap::new(),
        records,
        qq: Vec::new(),
    }
}

fn base_params(cfg: &ExperimentConfig, n: usize, delta_mu: f64, family: NoiseFamily) -> BTreeMap<String, serde_json::Value> {
    BTreeMap::from([
        ("n".to_string(), json!(n)),
        ("delta_mu".to_string(), json!(delta_mu)),
        ("noise".to_string(), json!(family.label())),
        ("sigma_mode".to_string(), json!(cfg.sigma_mode)),
        ("trials".to_string(), json!(cfg.trials)),
        ("seed".to_string(), json!(cfg.seed)),
    ])
}

fn plan<'a>(cfg: &ExperimentConfig, net: &'a NetworkSpec, family: NoiseFamily, delta_mu: f64) -> TrialPlan<'a> {
    TrialPlan {
        net,
        family,
        delta_mu,
        sigma_mode: cfg.sigma_mode,
        over_conditioned: cfg.over_conditioned,
        permutations: cfg.permutations,
        range_sigmas: cfg.range_sigmas,
        seed: cfg.seed,
        trials: cfg.trials,
    }
}

/// Null images: false positive rates of every computed p-value at `alpha`.
pub fn run_fpr_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let net = cfg.network(cfg.n)?;
    let records = plan(cfg, &net, cfg.noise, 0.0).run()?;
    let label = format!("n={}", cfg.n);
    let mut notes = Vec::new();
    if matches!(cfg.noise, NoiseFamily::GaussianCorrelated { .. }) {
        notes.push(
            "spatially correlated synthetic nulls stand in for real images whose noise is correlated".into(),
        );
    }
    Ok(ExperimentReport {
        experiment: "fpr".into(),
        groups: vec![group(label, base_params(cfg, cfg.n, 0.0, cfg.noise), records, &[cfg.alpha])],
        metrics: BTreeMap::new(),
        notes,
    })
}

/// Signal images over the effect-size grid, with homotopy and over-conditioned tests.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let net = cfg.network(cfg.n)?;
    let mut cfg = cfg.clone();
    cfg.over_conditioned = true;
    let mut groups = Vec::new();
    for &delta in &cfg.delta_mu_grid {
        let records = plan(&cfg, &net, NoiseFamily::Gaussian, delta).run()?;
        groups.push(group(
            format!("delta_mu={delta}"),
            base_params(&cfg, cfg.n, delta, NoiseFamily::Gaussian),
            records,
            &[cfg.alpha],
        ));
    }
    Ok(ExperimentReport {
        experiment: "power".into(),
        groups,
        metrics: BTreeMap::new(),
        notes: vec![],
    })
}

/// Mean number of linear regions crossed per image across image sizes.
pub fn run_breakpoint_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut groups = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.n_grid {
        let net = cfg.network(n)?;
        let records = plan(cfg, &net, NoiseFamily::Gaussian, 0.0).run()?;
        let g = group(format!("n={n}"), base_params(cfg, n, 0.0, NoiseFamily::Gaussian), records, &[cfg.alpha]);
        points.push((n as f64, g.summary().mean_region_count));
        groups.push(g);
    }
    let mut metrics = BTreeMap::new();
    if points.len() >= 2 && points.iter().all(|p| p.1 > 0.0) {
        metrics.insert("log_log_slope".into(), log_log_slope(&points));
    }
    Ok(ExperimentReport {
        experiment: "breakpoints".into(),
        groups,
        metrics,
        notes: vec![],
    })
}

/// Network used by the pivot study for a given hidden activation: the CNN for
/// ReLU, otherwise an 8-16-8 dense net on a 2x4 grid.
pub fn pivot_network(cfg: &ExperimentConfig, activation: PivotActivation, kcut: usize) -> Result<(NetworkSpec, usize)> {
    let seed = match cfg.network {
        NetworkSource::Cnn4 { seed } | NetworkSource::Dense3 { seed, .. } => seed,
        _ => 0,
    };
    let dense = |act: DenseActivation| NetworkSource::Dense3 {
        seed,
        hidden: 16,
        height: 2,
        width: 4,
        activation: act,
    };
    let source = match activation {
        PivotActivation::Relu => return Ok((cfg.network(cfg.n)?, cfg.n)),
        PivotActivation::Sigmoid3cut => dense(DenseActivation::Sigmoid { cuts: 3 }),
        PivotActivation::Tanh3cut => dense(DenseActivation::Tanh { cuts: 3 }),
        PivotActivation::SigmoidKcut => dense(DenseActivation::Sigmoid { cuts: kcut }),
    };
    Ok((source.build(8, &cfg.base_dir)?, 8))
}

/// Null pivot: QQ data and KS uniformity statistics for selective and naive p-values.
pub fn run_pivot_experiment(cfg: &ExperimentConfig, activation: PivotActivation) -> Result<ExperimentReport> {
    let kcut = cfg.cuts_grid.iter().copied().max().unwrap_or(3);
    let (net, n) = pivot_network(cfg, activation, kcut)?;
    let records = plan(cfg, &net, cfg.noise, 0.0).run()?;
    let label = format!("{}:n={n}", serde_json::to_value(activation).unwrap().as_str().unwrap());
    let mut g = group(label, base_params(cfg, n, 0.0, cfg.noise), records, &[cfg.alpha]);
    let selective = g.selective_p_values();
    let naive = g.naive_p_values();
    let ks_sel = ks_uniform(&selective);
    let ks_naive = ks_uniform(&naive);
    g.metrics.insert("ks_selective_statistic".into(), ks_sel.statistic);
    g.metrics.insert("ks_selective_p".into(), ks_sel.p_value);
    g.metrics.insert("ks_naive_statistic".into(), ks_naive.statistic);
    g.metrics.insert("ks_naive_p".into(), ks_naive.p_value);
    g.qq = uniform_qq(&selective);
    Ok(ExperimentReport {
        experiment: "pivot".into(),
        groups: vec![g],
        metrics: BTreeMap::new(),
        notes: vec![],
    })
}

/// Misspecified noise families and plug-in variance, each evaluated at every alpha.
pub fn run_robustness_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let net = cfg.network(cfg.n)?;
    let mut groups = Vec::new();
    let mut settings: Vec<(NoiseFamily, SigmaMode)> =
        cfg.families.iter().map(|&f| (f, SigmaMode::Known)).collect();
    if cfg.include_estimated_sigma {
        settings.push((NoiseFamily::Gaussian, SigmaMode::Estimated));
    }
    for (family, mode) in settings {
        let mut c = cfg.clone();
        c.sigma_mode = mode;
        let records = plan(&c, &net, family, 0.0).run()?;
        let label = match mode {
            SigmaMode::Known => family.label(),
            SigmaMode::Estimated => format!("{}+estimated_sigma", family.label()),
        };
        groups.push(group(label, base_params(&c, c.n, 0.0, family), records, &cfg.alphas));
    }
    Ok(ExperimentReport {
        experiment: "robustness".into(),
        groups,
        metrics: BTreeMap::new(),
        notes: vec![],
    })
}

/// Region and truncation-interval counts of the dense sigmoid net as the number
/// of approximation pieces grows.
pub fn run_cut_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let seed = match cfg.network {
        NetworkSource::Cnn4 { seed } | NetworkSource::Dense3 { seed, .. } => seed,
        _ => 0,
    };
    let mut groups = Vec::new();
    for &cuts in &cfg.cuts_grid {
        let net = NetworkSource::Dense3 {
            seed,
            hidden: 16,
            height: 2,
            width: 4,
            activation: DenseActivation::Sigmoid { cuts },
        }
        .build(8, &cfg.base_dir)?;
        let records = plan(cfg, &net, NoiseFamily::Gaussian, 0.0).run()?;
        let mut params = base_params(cfg, 8, 0.0, NoiseFamily::Gaussian);
        params.insert("cuts".into(), json!(cuts));
        groups.push(group(format!("cuts={cuts}"), params, records, &[cfg.alpha]));
    }
    Ok(ExperimentReport {
        experiment: "cuts".into(),
        groups,
        metrics: BTreeMap::new(),
        notes: vec![],
    })
}
