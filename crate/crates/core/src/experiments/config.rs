use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::square_side;
use crate::network::{self, LoadOptions, NetworkSpec, PiecewiseLinearActivation, SmoothKind};

/// Noise distribution for synthetic images; every family has unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    /// Azzalini skew-normal with the given shape parameter.
    SkewNormal {
        #[serde(default = "default_skew_shape")]
        shape: f64,
    },
    StudentT {
        #[serde(default = "default_df")]
        df: f64,
    },
    /// Gaussian with covariance `rho^(|di| + |dj|)` between grid positions.
    GaussianCorrelated {
        #[serde(default = "default_rho")]
        rho: f64,
    },
}

fn default_skew_shape() -> f64 {
    10.0
}

fn default_df() -> f64 {
    20.0
}

fn default_rho() -> f64 {
    0.5
}

impl NoiseFamily {
    pub fn label(&self) -> String {
        match self {
            NoiseFamily::Gaussian => "gaussian".into(),
            NoiseFamily::Laplace => "laplace".into(),
            NoiseFamily::SkewNormal { shape } => format!("skew_normal({shape})"),
            NoiseFamily::StudentT { df } => format!("student_t({df})"),
            NoiseFamily::GaussianCorrelated { rho } => format!("gaussian_correlated({rho})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Known,
    /// Plug-in variance from an independent reference image of the same size.
    Estimated,
}

/// Hidden activation for the pivot study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PivotActivation {
    Relu,
    Sigmoid3cut,
    Tanh3cut,
    SigmoidKcut,
}

impl std::str::FromStr for PivotActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "relu" => PivotActivation::Relu,
            "sigmoid-3cut" => PivotActivation::Sigmoid3cut,
            "tanh-3cut" => PivotActivation::Tanh3cut,
            "sigmoid-kcut" => PivotActivation::SigmoidKcut,
            other => return Err(Error::Argument(format!("unknown pivot activation {other:?}"))),
        })
    }
}

/// Which network the experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSource {
    /// Seeded four-layer CNN, rebuilt for each image size.
    Cnn4 { seed: u64 },
    /// Seeded `n -> hidden -> n` dense net on a `height x width` grid.
    Dense3 {
        seed: u64,
        hidden: usize,
        height: usize,
        width: usize,
        activation: DenseActivation,
    },
    /// Pixel thresholding: a single region on every line.
    Identity,
    /// Weights loaded from an exchange-format manifest.
    Manifest {
        path: PathBuf,
        #[serde(default)]
        smooth_cuts: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum DenseActivation {
    Relu,
    Sigmoid { cuts: usize },
    Tanh { cuts: usize },
}

impl DenseActivation {
    pub fn build(self) -> Result<PiecewiseLinearActivation> {
        match self {
            DenseActivation::Relu => Ok(PiecewiseLinearActivation::relu()),
            DenseActivation::Sigmoid { cuts } => PiecewiseLinearActivation::approximate(SmoothKind::Sigmoid, cuts),
            DenseActivation::Tanh { cuts } => PiecewiseLinearActivation::approximate(SmoothKind::Tanh, cuts),
        }
    }
}

impl NetworkSource {
    /// Builds the network for an image of `pixels` pixels. Returns it with the
    /// image grid it expects.
    pub fn build(&self, pixels: usize, base: &Path) -> Result<NetworkSpec> {
        match self {
            NetworkSource::Cnn4 { seed } => {
                let side = square_side(pixels)
                    .ok_or_else(|| Error::Argument(format!("n = {pixels} is not a perfect square")))?;
                network::init::cnn4(side, side, *seed)
            }
            NetworkSource::Dense3 {
                seed,
                hidden,
                height,
                width,
                activation,
            } => network::init::dense3(*height, *width, *hidden, activation.build()?, *seed),
            NetworkSource::Identity => {
                let side = square_side(pixels)
                    .ok_or_else(|| Error::Argument(format!("n = {pixels} is not a perfect square")))?;
                network::init::identity(side, side)
            }
            NetworkSource::Manifest { path, smooth_cuts } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let net = network::load_network_with(
                    &path,
                    LoadOptions {
                        smooth_cuts: *smooth_cuts,
                    },
                )?;
                if net.input_len() == pixels {
                    Ok(net)
                } else {
                    let side = square_side(pixels)
                        .ok_or_else(|| Error::Argument(format!("n = {pixels} is not a perfect square")))?;
                    net.with_input_shape(side, side)
                }
            }
        }
    }
}

fn default_trials() -> usize {
    120
}

fn default_alpha() -> f64 {
    0.05
}

fn default_range() -> f64 {
    crate::homotopy::DEFAULT_RANGE_SIGMAS
}

fn default_network() -> NetworkSource {
    NetworkSource::Cnn4 {
        seed: network::init::REFERENCE_CNN_SEED,
    }
}

fn default_n() -> usize {
    64
}

fn default_noise() -> NoiseFamily {
    NoiseFamily::Gaussian
}

fn default_sigma_mode() -> SigmaMode {
    SigmaMode::Known
}

fn default_delta_grid() -> Vec<f64> {
    vec![0.5, 1.0, 1.5, 2.0]
}

fn default_n_grid() -> Vec<usize> {
    vec![16, 64, 256]
}

fn default_alphas() -> Vec<f64> {
    vec![0.05, 0.1]
}

fn default_families() -> Vec<NoiseFamily> {
    vec![
        NoiseFamily::Laplace,
        NoiseFamily::SkewNormal { shape: 10.0 },
        NoiseFamily::StudentT { df: 20.0 },
    ]
}

fn default_cuts_grid() -> Vec<usize> {
    vec![3, 5, 7]
}

/// Settings shared by every experiment; grid fields are used by the experiments
/// that sweep them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub delta_mu: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseFamily,
    #[serde(default = "default_sigma_mode")]
    pub sigma_mode: SigmaMode,
    #[serde(default)]
    pub seed: u64,
    /// Permutations per trial for the permutation baseline; 0 disables it.
    #[serde(default)]
    pub permutations: usize,
    #[serde(default = "default_network")]
    pub network: NetworkSource,
    /// Search range half-width in units of `sigma_eta`.
    #[serde(default = "default_range")]
    pub range_sigmas: f64,
    /// Also compute over-conditioned p-values.
    #[serde(default)]
    pub over_conditioned: bool,
    #[serde(default = "default_delta_grid")]
    pub delta_mu_grid: Vec<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_families")]
    pub families: Vec<NoiseFamily>,
    /// Also run the known-family experiment with estimated variance.
    #[serde(default = "default_true")]
    pub include_estimated_sigma: bool,
    #[serde(default = "default_cuts_grid")]
    pub cuts_grid: Vec<usize>,
    /// Oracle check: networks and images per network.
    #[serde(default = "default_oracle_count")]
    pub oracle_networks: usize,
    #[serde(default = "default_oracle_count")]
    pub oracle_images: usize,
    /// Oracle grid step and endpoint tolerance, in units of `sigma_eta`.
    #[serde(default = "default_grid_step")]
    pub oracle_grid_step: f64,
    #[serde(default = "default_endpoint_tol")]
    pub oracle_endpoint_tol: f64,
    /// Directory relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_oracle_count() -> usize {
    20
}

fn default_grid_step() -> f64 {
    1e-3
}

fn default_endpoint_tol() -> f64 {
    1e-6
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dense = matches!(self.network, NetworkSource::Dense3 { .. });
        if !dense && square_side(self.n).is_none() {
            return Err(Error::Argument(format!("n = {} is not a perfect square", self.n)));
        }
        if self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.delta_mu >= 0.0) {
            return Err(Error::Argument("delta_mu must be non-negative".into()));
        }
        if !(self.range_sigmas > 0.0) {
            return Err(Error::Argument("range_sigmas must be positive".into()));
        }
        if let NoiseFamily::GaussianCorrelated { rho } = self.noise {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::Argument(format!("rho must lie in [0, 1), got {rho}")));
            }
        }
        Ok(())
    }

    pub fn network(&self, pixels: usize) -> Result<NetworkSpec> {
        self.network.build(pixels, &self.base_dir)
    }
}
