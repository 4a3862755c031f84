//! Test direction, noise model, and the one-dimensional line through the observed
//! image along which the conditional distribution lives.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::{ImageVector, SegmentationMask};

/// Covariance of the additive Gaussian noise.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// `sigma^2 I`.
    Isotropic { sigma: f64 },
    /// A full symmetric positive-definite covariance.
    Full { cov: DMatrix<f64> },
}

impl NoiseModel {
    pub fn isotropic(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(NoiseModel::Isotropic { sigma })
    }

    /// Validates symmetry (within 1e-10) and positive-definiteness via Cholesky.
    pub fn full(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::Argument("covariance must be square".into()));
        }
        let n = cov.nrows();
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 {
                    return Err(Error::Argument(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if Cholesky::new(cov.clone()).is_none() {
            return Err(Error::Argument("covariance is not positive definite".into()));
        }
        Ok(NoiseModel::Full { cov })
    }

    pub fn dim_matches(&self, n: usize) -> bool {
        match self {
            NoiseModel::Isotropic { .. } => true,
            NoiseModel::Full { cov } => cov.nrows() == n,
        }
    }

    /// `Sigma v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            NoiseModel::Isotropic { sigma } => v.iter().map(|x| sigma * sigma * x).collect(),
            NoiseModel::Full { cov } => (cov * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    /// Multiplies every covariance entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            NoiseModel::Isotropic { sigma } => Self::isotropic(sigma * factor.sqrt()),
            NoiseModel::Full { cov } => Self::full(cov * factor),
        }
    }
}

/// Contrast `eta` with `eta . x` = mean(object) - mean(background).
///
/// Returns `None` when either region is empty: nothing was detected, so there is
/// nothing to test.
pub fn build_test_direction(mask: &SegmentationMask) -> Option<Vec<f64>> {
    let n_obj = mask.object_count();
    let n_bg = mask.len() - n_obj;
    if n_obj == 0 || n_bg == 0 {
        return None;
    }
    let (w_obj, w_bg) = (1.0 / n_obj as f64, -1.0 / n_bg as f64);
    Some(mask.labels().iter().map(|&l| if l { w_obj } else { w_bg }).collect())
}

/// The line `x(z) = a + b z` through the observed image along `eta`.
#[derive(Debug, Clone)]
pub struct LineParametrization {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub z_obs: f64,
    pub eta: Vec<f64>,
    /// Standard deviation of `eta . X` under the noise model.
    pub sigma_eta: f64,
}

impl LineParametrization {
    pub fn point(&self, z: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + b * z).collect()
    }

    /// Default search range `[-k sigma_eta, k sigma_eta]`.
    pub fn search_range(&self, k: f64) -> (f64, f64) {
        (-k * self.sigma_eta, k * self.sigma_eta)
    }
}

/// `b = Sigma eta / (eta' Sigma eta)`, `z_obs = eta' x`, `a = x - b z_obs`.
pub fn line_parametrization(
    x_obs: &ImageVector,
    eta: &[f64],
    noise: &NoiseModel,
) -> Result<LineParametrization> {
    let x = x_obs.values();
    if eta.len() != x.len() || !noise.dim_matches(x.len()) {
        return Err(Error::Argument(format!(
            "dimension mismatch: image {}, eta {}",
            x.len(),
            eta.len()
        )));
    }
    let sigma_times_eta = noise.apply(eta);
    let variance: f64 = eta.iter().zip(&sigma_times_eta).map(|(e, s)| e * s).sum();
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::Numeric(format!("degenerate test-statistic variance {variance}")));
    }
    let b: Vec<f64> = sigma_times_eta.iter().map(|s| s / variance).collect();
    let z_obs: f64 = eta.iter().zip(x).map(|(e, v)| e * v).sum();
    let a = x.iter().zip(&b).map(|(v, bi)| v - bi * z_obs).collect();
    Ok(LineParametrization {
        a,
        b,
        z_obs,
        eta: eta.to_vec(),
        sigma_eta: variance.sqrt(),
    })
}

/// Plug-in isotropic noise model from the unbiased sample variance of `reference`.
pub fn estimate_variance(reference: &[f64]) -> Result<NoiseModel> {
    if reference.len() < 2 {
        return Err(Error::Argument(format!(
            "variance estimate needs at least 2 values, got {}",
            reference.len()
        )));
    }
    let n = reference.len() as f64;
    let mean = reference.iter().sum::<f64>() / n;
    let var = reference.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Argument("reference values have zero variance".into()));
    }
    NoiseModel::isotropic(var.sqrt())
}

/// Pools the pixels of several reference images.
pub fn estimate_variance_from_images(images: &[ImageVector]) -> Result<NoiseModel> {
    let pooled: Vec<f64> = images.iter().flat_map(|im| im.values().iter().copied()).collect();
    estimate_variance(&pooled)
}
