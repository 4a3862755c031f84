//! Synthetic null and signal images.

use std::f64::consts::{FRAC_2_PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::image::ImageVector;

use super::config::NoiseFamily;

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Covariance `rho^(|di| + |dj|)` over a `height x width` grid.
pub fn correlated_covariance(height: usize, width: usize, rho: f64) -> DMatrix<f64> {
    let n = height * width;
    DMatrix::from_fn(n, n, |p, q| {
        let (pi, pj) = (p / width, p % width);
        let (qi, qj) = (q / width, q % width);
        rho.powi((pi.abs_diff(qi) + pj.abs_diff(qj)) as i32)
    })
}

/// Draws unit-variance, zero-mean noise images of one family and size.
pub struct NoiseSampler {
    family: NoiseFamily,
    height: usize,
    width: usize,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl NoiseSampler {
    pub fn new(family: NoiseFamily, height: usize, width: usize) -> Result<Self> {
        let chol = match family {
            NoiseFamily::GaussianCorrelated { rho } => {
                let cov = correlated_covariance(height, width, rho);
                Some(Cholesky::new(cov).ok_or_else(|| {
                    Error::Numeric(format!("correlation {rho} gives a non-positive-definite covariance"))
                })?)
            }
            NoiseFamily::SkewNormal { shape } if !shape.is_finite() => {
                return Err(Error::Argument("skew-normal shape must be finite".into()))
            }
            NoiseFamily::StudentT { df } if !(df > 2.0) => {
                return Err(Error::Argument(format!("student-t needs df > 2 for unit variance, got {df}")))
            }
            _ => None,
        };
        Ok(Self {
            family,
            height,
            width,
            chol,
        })
    }

    /// Population covariance of the generated images.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l() * c.l().transpose())
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.pixels();
        match self.family {
            NoiseFamily::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            NoiseFamily::Laplace => {
                // scale 1/sqrt(2) gives unit variance
                let b = 1.0 / SQRT_2;
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() - 0.5;
                        -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                    })
                    .collect()
            }
            NoiseFamily::SkewNormal { shape } => {
                let delta = shape / (1.0 + shape * shape).sqrt();
                let mean = delta * FRAC_2_PI.sqrt();
                let sd = (1.0 - FRAC_2_PI * delta * delta).sqrt();
                (0..n)
                    .map(|_| {
                        let u0: f64 = rng.sample(StandardNormal);
                        let u1: f64 = rng.sample(StandardNormal);
                        let x = delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1;
                        (x - mean) / sd
                    })
                    .collect()
            }
            NoiseFamily::StudentT { df } => {
                let dist = StudentT::new(df).expect("validated df");
                let scale = (df / (df - 2.0)).sqrt();
                (0..n).map(|_| dist.sample(rng) / scale).collect()
            }
            NoiseFamily::GaussianCorrelated { .. } => {
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let chol = self.chol.as_ref().expect("correlated sampler has a factor");
                (chol.l() * z).as_slice().to_vec()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ImageVector {
        ImageVector::new(self.sample_values(rng), self.height, self.width).expect("sampler shape is valid")
    }
}

pub fn generate_null_image<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    family: NoiseFamily,
    rng: &mut R,
) -> Result<ImageVector> {
    Ok(NoiseSampler::new(family, height, width)?.sample(rng))
}

/// Pixels of the centered square object covering `floor(n / 4)` pixels.
pub fn object_pixels(height: usize, width: usize) -> Vec<usize> {
    let target = (height * width) / 4;
    let side = ((target as f64).sqrt().floor() as usize).min(height).min(width);
    let top = (height - side) / 2;
    let left = (width - side) / 2;
    (top..top + side)
        .flat_map(|i| (left..left + side).map(move |j| i * width + j))
        .collect()
}

/// Unit-variance Gaussian noise plus `delta_mu` on the centered square object.
/// With the same generator state the noise field equals the Gaussian null draw.
pub fn generate_signal_image<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    delta_mu: f64,
    rng: &mut R,
) -> Result<(ImageVector, Vec<usize>)> {
    if !(delta_mu >= 0.0) {
        return Err(Error::Argument(format!("delta_mu must be non-negative, got {delta_mu}")));
    }
    let mut values = NoiseSampler::new(NoiseFamily::Gaussian, height, width)?.sample_values(rng);
    let object = object_pixels(height, width);
    for &p in &object {
        values[p] += delta_mu;
    }
    Ok((ImageVector::new(values, height, width)?, object))
}
