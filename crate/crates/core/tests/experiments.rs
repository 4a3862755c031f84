use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use siseg::experiments::{
    generate_signal_image, object_pixels, run_breakpoint_experiment, run_cut_experiment, run_fpr_experiment,
    run_oracle_check, run_pivot_experiment, run_robustness_experiment, ExperimentConfig, NetworkSource,
    NoiseFamily, NoiseSampler, PivotActivation,
};

fn small(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

#[test]
fn reports_are_deterministic() {
    let cfg = small("n = 16\ntrials = 12\nseed = 5\nover_conditioned = true\npermutations = 50");
    let a = run_fpr_experiment(&cfg).unwrap();
    let b = run_fpr_experiment(&cfg).unwrap();
    assert_eq!(a.deterministic_payload(), b.deterministic_payload());

    let mut other = cfg.clone();
    other.seed = 6;
    let c = run_fpr_experiment(&other).unwrap();
    assert_ne!(a.deterministic_payload(), c.deterministic_payload());

    let g = a.group("n=16").unwrap();
    assert_eq!(g.records.len(), 12);
    let s = g.summary();
    assert_eq!(s.trials, 12);
    assert!(s.over_conditioned.is_some() && s.permutation.is_some());
}

#[test]
fn report_files() {
    let cfg = small("n = 16\ntrials = 10\nseed = 1");
    let report = run_pivot_experiment(&cfg, PivotActivation::Relu).unwrap();
    let g = report.group("relu:n=16").unwrap();
    for key in ["ks_selective_p", "ks_naive_p", "ks_selective_statistic", "ks_naive_statistic"] {
        assert!(g.metrics.contains_key(key), "{key}");
    }

    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "pivot");
    let lines: Vec<serde_json::Value> = fs::read_to_string(dir.path().join("trials.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.iter().all(|l| l["group"] == "relu:n=16"));
    let qq = fs::read_to_string(dir.path().join("qq_relu_n_16.csv")).unwrap();
    assert!(qq.starts_with("uniform_quantile,p_value\n"));
    assert_eq!(qq.lines().count(), 1 + g.selective_p_values().len());
}

#[test]
fn config_errors() {
    assert!(ExperimentConfig::from_toml("n = 15").is_err());
    assert!(ExperimentConfig::from_toml("trials = 0").is_err());
    assert!(ExperimentConfig::from_toml("alpha = 1.5").is_err());
    assert!(ExperimentConfig::from_toml("unknown_field = 3").is_err());
    assert!(ExperimentConfig::from_toml("noise = { family = \"cauchy\" }").is_err());
    assert!(ExperimentConfig::from_toml("noise = { family = \"gaussian_correlated\", rho = 1.0 }").is_err());

    let cfg = small("noise = { family = \"student_t\" }\nnetwork = { kind = \"identity\" }");
    assert_eq!(cfg.noise, NoiseFamily::StudentT { df: 20.0 });
    assert_eq!(cfg.network, NetworkSource::Identity);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "network = { kind = \"manifest\", path = \"weights/net.json\" }").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.base_dir, dir.path());
    assert!(cfg.network(64).is_err());
}

#[test]
fn every_noise_family_has_zero_mean_and_unit_variance() {
    let families = [
        NoiseFamily::Gaussian,
        NoiseFamily::Laplace,
        NoiseFamily::SkewNormal { shape: 10.0 },
        NoiseFamily::StudentT { df: 20.0 },
        NoiseFamily::GaussianCorrelated { rho: 0.5 },
    ];
    for family in families {
        let sampler = NoiseSampler::new(family, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..2000).flat_map(|_| sampler.sample_values(&mut rng)).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(m.abs() < 0.03, "{family:?} mean {m}");
        assert!((v - 1.0).abs() < 0.05, "{family:?} variance {v}");
    }
}

#[test]
fn correlated_neighbours_share_rho() {
    let sampler = NoiseSampler::new(NoiseFamily::GaussianCorrelated { rho: 0.5 }, 4, 4).unwrap();
    let cov = sampler.covariance().unwrap();
    assert_eq!(cov[(0, 1)], 0.5);
    assert_eq!(cov[(0, 5)], 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws: Vec<Vec<f64>> = (0..20_000).map(|_| sampler.sample_values(&mut rng)).collect();
    let c01 = draws.iter().map(|d| d[0] * d[1]).sum::<f64>() / draws.len() as f64;
    assert!((c01 - 0.5).abs() < 0.03, "{c01}");
}

#[test]
fn signal_image_shifts_the_object() {
    let obj = object_pixels(16, 16);
    assert_eq!(obj.len(), 64);
    let (x, truth) = generate_signal_image(16, 16, 50.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(truth, obj);
    for (i, v) in x.values().iter().enumerate() {
        assert_eq!(*v > 25.0, obj.contains(&i));
    }
}

#[test]
fn small_runs_of_every_experiment() {
    let cfg = small("trials = 4\nn_grid = [16, 64]\ncuts_grid = [3, 5]\nfamilies = [{ family = \"laplace\" }]");
    let b = run_breakpoint_experiment(&cfg).unwrap();
    assert!(b.metrics.contains_key("log_log_slope"));
    assert!(b.group("n=64").is_some());

    let r = run_robustness_experiment(&cfg).unwrap();
    assert_eq!(r.groups.len(), 2);
    for g in &r.groups {
        assert!(g.summary_at(0.05).is_some() && g.summary_at(0.1).is_some());
    }

    let c = run_cut_experiment(&cfg).unwrap();
    assert!(c.group("cuts=3").is_some() && c.group("cuts=5").is_some());

    let mut oracle = small("n = 16\noracle_networks = 2\noracle_images = 2\noracle_grid_step = 0.01");
    let report = run_oracle_check(&oracle).unwrap();
    assert_eq!(report.cases.len(), 4);
    assert!(report.passed);
    oracle.n = 256;
    assert!(run_oracle_check(&oracle).is_err());
}
