//! Inference engine for networks made of affine operations and piecewise-linear
//! activations.

pub mod activation;
pub mod eval;
pub mod init;
pub mod layer;
pub mod manifest;

pub use activation::{PiecewiseLinearActivation, SmoothKind};
pub use eval::{
    forward, forward_line, forward_line_trace, forward_trace, forward_values, AffineUnitConstraint,
    LineEvaluation, LineTrace,
};
pub use layer::{Conv2d, Dense, LayerSpec, NetworkSpec, Shape};
pub use manifest::{load_network, load_network_with, save_network, LoadOptions, FORMAT_VERSION};
