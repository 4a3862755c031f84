//! Selective inference for segmentations produced by piecewise-linear networks.
//!
//! Given an image and the object/background split a network produced on it, the
//! crate tests whether the mean intensity of the two regions differs, conditioning
//! on the segmentation so the p-value stays valid even though the same data chose
//! the regions. The conditional law is a Gaussian truncated to the set of line
//! positions where the network reproduces the observed mask; that set is traced
//! exactly by walking the network's linear regions along the line.

pub mod error;
pub mod experiments;
pub mod homotopy;
pub mod hypothesis;
pub mod image;
pub mod inference;
pub mod network;
pub mod region;
pub mod stats;

pub use error::{Error, Result};
pub use image::{ImageVector, SegmentationMask};
