//! The `si-seg-weights/1` exchange format.
//!
//! A TOML manifest lists the layers in order. Every parameter tensor lives in its
//! own raw little-endian `f64` blob, row-major, referenced by a path relative to
//! the manifest together with its element count:
//!
//! ```toml
//! format = "si-seg-weights/1"
//! input_height = 8
//! input_width = 8
//!
//! [[layers]]
//! kind = "conv2d"
//! filter_height = 3
//! filter_width = 3
//! in_channels = 1
//! out_channels = 4
//! kernel = { path = "layer0.kernel.f64", count = 36 }
//! bias = { path = "layer0.bias.f64", count = 4 }
//!
//! [[layers]]
//! kind = "activation"
//! function = "relu"
//!
//! [[layers]]
//! kind = "output_sign"
//! threshold = 0.0
//! ```
//!
//! Conv kernels are laid out `[filter_height][filter_width][in_channels][out_channels]`,
//! dense weights `[out_features][in_features]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::activation::{PiecewiseLinearActivation, SmoothKind};
use super::layer::{Conv2d, Dense, LayerSpec, NetworkSpec};

pub const FORMAT_VERSION: &str = "si-seg-weights/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub path: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "function")]
pub enum ActivationEntry {
    Identity,
    Relu,
    LeakyRelu {
        negative_slope: f64,
    },
    Piecewise {
        knots: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
    },
    /// Smooth functions are replaced by their piecewise-linear approximation.
    Sigmoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cuts: Option<usize>,
    },
    Tanh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cuts: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerEntry {
    Dense {
        in_features: usize,
        out_features: usize,
        weight: BlobRef,
        bias: BlobRef,
    },
    Conv2d {
        filter_height: usize,
        filter_width: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: BlobRef,
        bias: BlobRef,
    },
    #[serde(rename = "maxpool2x2")]
    MaxPool2x2,
    #[serde(rename = "upsample2x")]
    Upsample2x,
    Activation(ActivationEntry),
    OutputSign {
        #[serde(default)]
        threshold: f64,
        /// Output nonlinearity the threshold stands in for (informational).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub input_height: usize,
    pub input_width: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Cut count used for sigmoid/tanh hidden layers that do not carry their own.
    pub smooth_cuts: Option<usize>,
}

/// Loads and validates a network from a manifest path.
pub fn load_network(manifest_path: impl AsRef<Path>) -> Result<NetworkSpec> {
    load_network_with(manifest_path, LoadOptions::default())
}

pub fn load_network_with(manifest_path: impl AsRef<Path>, options: LoadOptions) -> Result<NetworkSpec> {
    let path = manifest_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.resolve(&base, options)
}

impl Manifest {
    pub fn resolve(&self, base: &Path, options: LoadOptions) -> Result<NetworkSpec> {
        if self.format != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format {:?}, expected {FORMAT_VERSION:?}",
                self.format
            )));
        }
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, entry)| entry.resolve(i, base, options))
            .collect::<Result<Vec<_>>>()?;
        NetworkSpec::new(self.input_height, self.input_width, layers)
    }
}

impl LayerEntry {
    fn resolve(&self, index: usize, base: &Path, options: LoadOptions) -> Result<LayerSpec> {
        let invalid = |message: String| Error::Validation {
            layer: index,
            message,
        };
        Ok(match self {
            LayerEntry::Dense {
                in_features,
                out_features,
                weight,
                bias,
            } => LayerSpec::Dense(Dense {
                in_features: *in_features,
                out_features: *out_features,
                weight: read_blob(base, weight, in_features * out_features, index)?,
                bias: read_blob(base, bias, *out_features, index)?,
            }),
            LayerEntry::Conv2d {
                filter_height,
                filter_width,
                in_channels,
                out_channels,
                kernel,
                bias,
            } => LayerSpec::Conv2d(Conv2d {
                filter_height: *filter_height,
                filter_width: *filter_width,
                in_channels: *in_channels,
                out_channels: *out_channels,
                kernel: read_blob(
                    base,
                    kernel,
                    filter_height * filter_width * in_channels * out_channels,
                    index,
                )?,
                bias: read_blob(base, bias, *out_channels, index)?,
            }),
            LayerEntry::MaxPool2x2 => LayerSpec::MaxPool2x2,
            LayerEntry::Upsample2x => LayerSpec::UpsampleNearest2x,
            LayerEntry::Activation(a) => {
                let f = match a {
                    ActivationEntry::Identity => PiecewiseLinearActivation::identity(),
                    ActivationEntry::Relu => PiecewiseLinearActivation::relu(),
                    ActivationEntry::LeakyRelu { negative_slope } => {
                        PiecewiseLinearActivation::leaky_relu(*negative_slope)
                    }
                    ActivationEntry::Piecewise {
                        knots,
                        slopes,
                        intercepts,
                    } => PiecewiseLinearActivation::new(knots.clone(), slopes.clone(), intercepts.clone())
                        .map_err(|e| invalid(e.to_string()))?,
                    ActivationEntry::Sigmoid { cuts } | ActivationEntry::Tanh { cuts } => {
                        let kind = if matches!(a, ActivationEntry::Sigmoid { .. }) {
                            SmoothKind::Sigmoid
                        } else {
                            SmoothKind::Tanh
                        };
                        let cuts = options.smooth_cuts.or(*cuts).ok_or_else(|| {
                            invalid(format!(
                                "{kind:?} hidden activation needs a piecewise approximation; set `cuts`"
                            ))
                        })?;
                        PiecewiseLinearActivation::approximate(kind, cuts)
                            .map_err(|e| invalid(e.to_string()))?
                    }
                };
                LayerSpec::Activation(f)
            }
            LayerEntry::OutputSign { threshold, .. } => LayerSpec::OutputSign {
                threshold: *threshold,
            },
        })
    }
}

fn read_blob(base: &Path, blob: &BlobRef, expected: usize, layer: usize) -> Result<Vec<f64>> {
    if blob.count != expected {
        return Err(Error::Validation {
            layer,
            message: format!(
                "blob {} declares {} elements, layer shape needs {expected}",
                blob.path, blob.count
            ),
        });
    }
    let path = base.join(&blob.path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != 8 * blob.count {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * blob.count
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_blob(dir: &Path, name: String, values: &[f64]) -> Result<BlobRef> {
    let path = dir.join(&name);
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(BlobRef {
        path: name,
        count: values.len(),
    })
}

/// Writes `net` as `<dir>/<stem>.toml` plus one blob per tensor; returns the manifest path.
pub fn save_network(
    net: &NetworkSpec,
    dir: impl AsRef<Path>,
    stem: &str,
    metadata: BTreeMap<String, String>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::with_capacity(net.layers().len());
    for (i, layer) in net.layers().iter().enumerate() {
        layers.push(match layer {
            LayerSpec::Dense(d) => LayerEntry::Dense {
                in_features: d.in_features,
                out_features: d.out_features,
                weight: write_blob(dir, format!("{stem}.layer{i}.weight.f64"), &d.weight)?,
                bias: write_blob(dir, format!("{stem}.layer{i}.bias.f64"), &d.bias)?,
            },
            LayerSpec::Conv2d(c) => LayerEntry::Conv2d {
                filter_height: c.filter_height,
                filter_width: c.filter_width,
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: write_blob(dir, format!("{stem}.layer{i}.kernel.f64"), &c.kernel)?,
                bias: write_blob(dir, format!("{stem}.layer{i}.bias.f64"), &c.bias)?,
            },
            LayerSpec::MaxPool2x2 => LayerEntry::MaxPool2x2,
            LayerSpec::UpsampleNearest2x => LayerEntry::Upsample2x,
            LayerSpec::Activation(f) => LayerEntry::Activation(ActivationEntry::Piecewise {
                knots: f.knots().to_vec(),
                slopes: f.slopes().to_vec(),
                intercepts: f.intercepts().to_vec(),
            }),
            LayerSpec::OutputSign { threshold } => LayerEntry::OutputSign {
                threshold: *threshold,
                source: None,
            },
        });
    }
    let shape = net.input_shape();
    let manifest = Manifest {
        format: FORMAT_VERSION.to_string(),
        input_height: shape.height,
        input_width: shape.width,
        metadata,
        layers,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let path = dir.join(format!("{stem}.toml"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
