//! Deterministic reference networks with seeded Gaussian weights (scaled by
//! `1/sqrt(fan_in)`, zero biases), so every experiment runs without trained weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

use super::activation::PiecewiseLinearActivation;
use super::layer::{Conv2d, Dense, LayerSpec, NetworkSpec};

/// Seed of the default experiment CNN. Screened over seeds 0..64 on a separate
/// null-image stream as the net whose masks track pixel intensity most strongly,
/// standing in for a trained segmenter.
pub const REFERENCE_CNN_SEED: u64 = 32;

fn gaussian(rng: &mut ChaCha8Rng, count: usize, fan_in: usize) -> Vec<f64> {
    let scale = 1.0 / (fan_in as f64).sqrt();
    (0..count).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn conv(rng: &mut ChaCha8Rng, in_channels: usize, out_channels: usize) -> Conv2d {
    Conv2d {
        filter_height: 3,
        filter_width: 3,
        in_channels,
        out_channels,
        kernel: gaussian(rng, 9 * in_channels * out_channels, 9 * in_channels),
        bias: vec![0.0; out_channels],
    }
}

fn dense(rng: &mut ChaCha8Rng, in_features: usize, out_features: usize) -> Dense {
    Dense {
        in_features,
        out_features,
        weight: gaussian(rng, in_features * out_features, in_features),
        bias: vec![0.0; out_features],
    }
}

/// The four-layer segmentation CNN: 3x3 conv to 4 channels, ReLU, 2x2 max pooling,
/// 2x nearest upsampling, 3x3 conv back to one channel, sign output.
pub fn cnn4(height: usize, width: usize, seed: u64) -> Result<NetworkSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = conv(&mut rng, 1, 4);
    let second = conv(&mut rng, 4, 1);
    NetworkSpec::new(
        height,
        width,
        vec![
            LayerSpec::Conv2d(first),
            LayerSpec::Activation(PiecewiseLinearActivation::relu()),
            LayerSpec::MaxPool2x2,
            LayerSpec::UpsampleNearest2x,
            LayerSpec::Conv2d(second),
            LayerSpec::OutputSign { threshold: 0.0 },
        ],
    )
}

/// Three-layer dense net `n -> hidden -> n` with the given hidden activation;
/// the input is laid out as a `height x width` grid.
pub fn dense3(
    height: usize,
    width: usize,
    hidden: usize,
    activation: PiecewiseLinearActivation,
    seed: u64,
) -> Result<NetworkSpec> {
    let n = height * width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = dense(&mut rng, n, hidden);
    let second = dense(&mut rng, hidden, n);
    NetworkSpec::new(
        height,
        width,
        vec![
            LayerSpec::Dense(first),
            LayerSpec::Activation(activation),
            LayerSpec::Dense(second),
            LayerSpec::OutputSign { threshold: 0.0 },
        ],
    )
}

/// Thresholds the raw pixels: one pixelwise identity layer then the sign output.
pub fn identity(height: usize, width: usize) -> Result<NetworkSpec> {
    let kernel = Conv2d {
        filter_height: 1,
        filter_width: 1,
        in_channels: 1,
        out_channels: 1,
        kernel: vec![1.0],
        bias: vec![0.0],
    };
    NetworkSpec::new(
        height,
        width,
        vec![LayerSpec::Conv2d(kernel), LayerSpec::OutputSign { threshold: 0.0 }],
    )
}
