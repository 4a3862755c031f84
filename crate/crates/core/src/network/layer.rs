use crate::error::{Error, Result};

use super::activation::PiecewiseLinearActivation;

/// Channel-major tensor shape; flat index is `c * h * w + i * w + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    /// Row-major `out_features x in_features`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Stride-1 convolution with zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub filter_height: usize,
    pub filter_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Row-major `[filter_height][filter_width][in_channels][out_channels]`.
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    #[inline]
    pub fn kernel_at(&self, di: usize, dj: usize, c: usize, o: usize) -> f64 {
        self.kernel[((di * self.filter_width + dj) * self.in_channels + c) * self.out_channels + o]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense(Dense),
    Conv2d(Conv2d),
    MaxPool2x2,
    UpsampleNearest2x,
    Activation(PiecewiseLinearActivation),
    /// Labels a unit as object iff its pre-activation is `>= threshold`.
    OutputSign { threshold: f64 },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense(_) => "dense",
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::MaxPool2x2 => "maxpool2x2",
            LayerSpec::UpsampleNearest2x => "upsample2x",
            LayerSpec::Activation(_) => "activation",
            LayerSpec::OutputSign { .. } => "output_sign",
        }
    }

    pub fn output_shape(&self, index: usize, input: Shape) -> Result<Shape> {
        let fail = |message: String| Error::Validation {
            layer: index,
            message,
        };
        match self {
            LayerSpec::Dense(d) => {
                if d.in_features != input.len() {
                    return Err(fail(format!(
                        "dense expects {} inputs but receives {} ({input})",
                        d.in_features,
                        input.len()
                    )));
                }
                if d.weight.len() != d.in_features * d.out_features || d.bias.len() != d.out_features {
                    return Err(fail("dense weight/bias sizes disagree with features".into()));
                }
                Ok(Shape::new(1, 1, d.out_features))
            }
            LayerSpec::Conv2d(c) => {
                if c.in_channels != input.channels {
                    return Err(fail(format!(
                        "conv expects {} input channels but receives {} ({input})",
                        c.in_channels, input.channels
                    )));
                }
                if c.filter_height == 0 || c.filter_width == 0 || c.out_channels == 0 {
                    return Err(fail("conv has an empty dimension".into()));
                }
                if c.kernel.len() != c.filter_height * c.filter_width * c.in_channels * c.out_channels
                    || c.bias.len() != c.out_channels
                {
                    return Err(fail("conv kernel/bias sizes disagree with declared shape".into()));
                }
                Ok(Shape::new(c.out_channels, input.height, input.width))
            }
            LayerSpec::MaxPool2x2 => {
                if input.height % 2 != 0 || input.width % 2 != 0 {
                    return Err(fail(format!("2x2 pooling needs even height and width, got {input}")));
                }
                Ok(Shape::new(input.channels, input.height / 2, input.width / 2))
            }
            LayerSpec::UpsampleNearest2x => {
                Ok(Shape::new(input.channels, input.height * 2, input.width * 2))
            }
            LayerSpec::Activation(_) => Ok(input),
            LayerSpec::OutputSign { threshold } => {
                if !threshold.is_finite() {
                    return Err(fail("output threshold is not finite".into()));
                }
                Ok(input)
            }
        }
    }

    fn check_finite(&self, index: usize) -> Result<()> {
        let params: &[&[f64]] = match self {
            LayerSpec::Dense(d) => &[&d.weight, &d.bias],
            LayerSpec::Conv2d(c) => &[&c.kernel, &c.bias],
            _ => &[],
        };
        if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation {
                layer: index,
                message: "non-finite weight".into(),
            });
        }
        Ok(())
    }
}

/// A validated feed-forward segmentation network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    input: Shape,
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape>,
}

impl NetworkSpec {
    /// Validates shape composition for a single-channel `height x width` input.
    pub fn new(height: usize, width: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let input = Shape::new(1, height, width);
        if input.is_empty() {
            return Err(Error::Argument("input shape must be non-empty".into()));
        }
        let last = layers.len().saturating_sub(1);
        if !matches!(layers.last(), Some(LayerSpec::OutputSign { .. })) {
            return Err(Error::Validation {
                layer: last,
                message: "final layer must be output_sign".into(),
            });
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut shape = input;
        for (i, layer) in layers.iter().enumerate() {
            layer.check_finite(i)?;
            if matches!(layer, LayerSpec::OutputSign { .. }) && i != last {
                return Err(Error::Validation {
                    layer: i,
                    message: "output_sign may only appear last".into(),
                });
            }
            shape = layer.output_shape(i, shape)?;
            shapes.push(shape);
        }
        if shape.len() != input.len() {
            return Err(Error::Validation {
                layer: last,
                message: format!(
                    "network emits {} labels for {} pixels",
                    shape.len(),
                    input.len()
                ),
            });
        }
        Ok(Self {
            input,
            layers,
            shapes,
        })
    }

    /// Same layers re-validated for another input size (convolutional nets only).
    pub fn with_input_shape(&self, height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, self.layers.clone())
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Output shape of each layer.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub(crate) fn input_shape_of(&self, layer: usize) -> Shape {
        if layer == 0 {
            self.input
        } else {
            self.shapes[layer - 1]
        }
    }
}
