use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use siseg::experiments::{self, ExperimentConfig, NoiseFamily, PivotActivation};
use siseg::homotopy::{compute_solution_path, PathOptions};
use siseg::hypothesis::{build_test_direction, estimate_variance_from_images, line_parametrization, NoiseModel};
use siseg::inference::{
    permutation_test, selective_p_pipeline, PipelineOptions, SearchRange, TestOutcome,
};
use siseg::network::{self, init, LoadOptions};
use siseg::ImageVector;

#[derive(Parser)]
#[command(name = "siseg", version, about = "Selective p-values for neural-network segmentations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one image and test object vs background conditional on the segmentation.
    Infer(InferArgs),
    /// Run a synthetic experiment and write trial records plus a summary.
    Experiment {
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hidden activation for the pivot experiment.
        #[arg(long, default_value = "relu")]
        activation: String,
    },
    /// Compare the region sweep against a brute-force grid scan.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded reference network in the exchange format.
    GenNetwork {
        #[arg(long, value_enum, default_value = "cnn4")]
        arch: Arch,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic null image (SIIMG1 format).
    GenImage {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        delta_mu: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// Known noise standard deviation.
    #[arg(long, conflicts_with = "estimate_from")]
    sigma: Option<f64>,
    /// Estimate the noise variance from the pixels of this reference image.
    #[arg(long)]
    estimate_from: Option<PathBuf>,
    /// Search range half-width in units of the statistic's standard deviation.
    #[arg(long, default_value_t = siseg::homotopy::DEFAULT_RANGE_SIGMAS)]
    zrange: f64,
    /// Also report the over-conditioned p-value.
    #[arg(long)]
    oc: bool,
    /// Also run the permutation baseline with this many permutations.
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Piece count for sigmoid/tanh hidden layers.
    #[arg(long)]
    smooth_cuts: Option<usize>,
    /// Write one JSON record per linear region crossed.
    #[arg(long)]
    dump_path: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Fpr,
    Power,
    Breakpoints,
    Pivot,
    Robustness,
    Cuts,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Cnn4,
    Dense3Relu,
    Dense3Sigmoid,
    Dense3Tanh,
}

fn infer(args: InferArgs) -> anyhow::Result<()> {
    let net = network::load_network_with(
        &args.weights,
        LoadOptions {
            smooth_cuts: args.smooth_cuts,
        },
    )?;
    let image = ImageVector::read(&args.image)?;
    let noise = match (&args.sigma, &args.estimate_from) {
        (Some(s), _) => NoiseModel::isotropic(*s)?,
        (None, Some(path)) => estimate_variance_from_images(&[ImageVector::read(path)?])?,
        (None, None) => bail!("either --sigma or --estimate-from is required"),
    };
    let options = PipelineOptions {
        range: SearchRange::Sigmas(args.zrange),
        over_conditioned: args.oc,
        path: PathOptions::default(),
    };
    let outcome = selective_p_pipeline(&net, &image, &noise, options)?;
    let mut value = serde_json::to_value(&outcome)?;
    if let Some(b) = args.permutations {
        let p = permutation_test(&net, &image, b, args.seed)?;
        value["p_permutation"] = serde_json::to_value(p)?;
    }
    if let (Some(dump), TestOutcome::Tested(_)) = (&args.dump_path, &outcome) {
        let mask = network::forward(&net, &image)?;
        let eta = build_test_direction(&mask).expect("detected");
        let line = line_parametrization(&image, &eta, &noise)?;
        let (z_min, z_max) = line.search_range(args.zrange);
        let path = compute_solution_path(&net, &line, z_min, z_max)?;
        let file = File::create(dump).with_context(|| format!("creating {}", dump.display()))?;
        path.write_dump(BufWriter::new(file))?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn experiment(kind: ExperimentKind, config: PathBuf, out: PathBuf, activation: &str) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let report = match kind {
        ExperimentKind::Fpr => experiments::run_fpr_experiment(&cfg)?,
        ExperimentKind::Power => experiments::run_power_experiment(&cfg)?,
        ExperimentKind::Breakpoints => experiments::run_breakpoint_experiment(&cfg)?,
        ExperimentKind::Pivot => experiments::run_pivot_experiment(&cfg, activation.parse::<PivotActivation>()?)?,
        ExperimentKind::Robustness => experiments::run_robustness_experiment(&cfg)?,
        ExperimentKind::Cuts => experiments::run_cut_experiment(&cfg)?,
    };
    report.write(&out)?;
    println!("{}", report.summary_json());
    Ok(())
}

fn oracle_check(config: PathBuf, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let cfg = ExperimentConfig::load(&config)?;
    let report = experiments::run_oracle_check(&cfg)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = out {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("oracle.json"), &text)?;
    }
    println!(
        "oracle check: {} cases, max endpoint deviation {:.3e} sigma (tolerance {:.1e}), {} mask disagreements: {}",
        report.cases.len(),
        report.max_deviation,
        report.tolerance,
        report.total_mask_disagreements,
        if report.passed { "PASS" } else { "FAIL" }
    );
    Ok(report.passed)
}

fn gen_network(arch: Arch, n: usize, seed: u64, out: PathBuf) -> anyhow::Result<()> {
    let net = match arch {
        Arch::Cnn4 => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                bail!("n = {n} is not a perfect square");
            }
            init::cnn4(side, side, seed)?
        }
        Arch::Dense3Relu => init::dense3(2, 4, 16, network::PiecewiseLinearActivation::relu(), seed)?,
        Arch::Dense3Sigmoid | Arch::Dense3Tanh => {
            let kind = if matches!(arch, Arch::Dense3Sigmoid) {
                network::SmoothKind::Sigmoid
            } else {
                network::SmoothKind::Tanh
            };
            init::dense3(2, 4, 16, network::PiecewiseLinearActivation::approximate(kind, 3)?, seed)?
        }
    };
    let meta = BTreeMap::from([
        ("generator".to_string(), "seeded-gaussian".to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    let path = network::save_network(&net, &out, "network", meta)?;
    println!("{}", path.display());
    Ok(())
}

fn gen_image(n: usize, seed: u64, delta_mu: f64, out: PathBuf) -> anyhow::Result<()> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        bail!("n = {n} is not a perfect square");
    }
    let mut rng = experiments::trial_rng(seed, 0);
    let image = if delta_mu > 0.0 {
        experiments::generate_signal_image(side, side, delta_mu, &mut rng)?.0
    } else {
        experiments::generate_null_image(side, side, NoiseFamily::Gaussian, &mut rng)?
    };
    image.write_binary(&out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Infer(args) => infer(args).map(|_| true),
        Command::Experiment {
            kind,
            config,
            out,
            activation,
        } => experiment(kind, config, out, &activation).map(|_| true),
        Command::OracleCheck { config, out } => oracle_check(config, out),
        Command::GenNetwork { arch, n, seed, out } => gen_network(arch, n, seed, out).map(|_| true),
        Command::GenImage { n, seed, delta_mu, out } => gen_image(n, seed, delta_mu, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
